#pragma once

// Linear CCS probes p(x) = sigmoid(theta . x + b): loss, gradient, full-batch
// AdamW training and the prediction / truth-disambiguation pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccs/activation_store.hpp"
#include "ccs/core.hpp"
#include "ccs/rng.hpp"

namespace ccs {

struct LinearProbe {
  Vector theta;
  double bias = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(theta.size()); }
};

enum class LossVariant { kOriginal, kSymmetric };

inline const char* to_string(LossVariant v) { return v == LossVariant::kOriginal ? "original" : "symmetric"; }

inline LossVariant parse_loss_variant(const std::string& s) {
  if (s == "original") return LossVariant::kOriginal;
  if (s == "symmetric") return LossVariant::kSymmetric;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss variant '" + s + "'");
}

// Sums over pairs unless produced by per_pair().
struct LossBreakdown {
  double consistency = 0.0;
  double confidence = 0.0;
  double total = 0.0;
  LossVariant variant = LossVariant::kSymmetric;
  std::size_t n_pairs = 0;

  LossBreakdown per_pair() const {
    const double n = static_cast<double>(std::max<std::size_t>(n_pairs, 1));
    return {consistency / n, confidence / n, total / n, variant, 1};
  }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 1000;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  LossVariant loss_variant = LossVariant::kSymmetric;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct MethodOutput {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<double> scores;
  bool hard = false;
  bool oriented = false;
  bool flip = false;

  std::size_t size() const { return scores.size(); }
};

// Standard deviation of a unit normal truncated to [-2, 2].
inline constexpr double kTruncatedNormalStd = 0.87962566103423978;

// theta ~ truncated normal on +-2 of the underlying normal, rescaled so the
// result has standard deviation 1/sqrt(dim); bias = 0.
inline LinearProbe init_probe(std::size_t dim, std::uint64_t seed) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "probe dimension must be >= 1");
  Rng rng = make_rng(derive_seed(seed, "init_probe", 0));
  Gaussian gauss;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim)) / kTruncatedNormalStd;
  LinearProbe probe{Vector(static_cast<Eigen::Index>(dim)), 0.0};
  for (Eigen::Index j = 0; j < probe.theta.size(); ++j) {
    double z = gauss(rng);
    while (std::abs(z) > 2.0) z = gauss(rng);
    probe.theta(j) = z * scale;
  }
  return probe;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double probe_eval(const LinearProbe& probe, const Vector& x) {
  require(x.size() == probe.theta.size(), ErrorCode::kDimensionMismatch,
          "input has " + std::to_string(x.size()) + " dims, probe has " + std::to_string(probe.theta.size()));
  const double p = sigmoid(probe.theta.dot(x) + probe.bias);
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
}

struct LossAndGradient {
  LossBreakdown loss;  // per-pair means
  Vector grad_theta;
  double grad_bias = 0.0;
};

namespace detail {

inline void check_probe_shape(const LinearProbe& probe, const ContrastActivationSet& set) {
  require(static_cast<std::size_t>(probe.theta.size()) == set.dim(), ErrorCode::kDimensionMismatch,
          "probe has " + std::to_string(probe.theta.size()) + " dims, set has " + std::to_string(set.dim()));
}

// Per-pair loss terms and derivatives with respect to p+ and p-.
struct PairTerms {
  double consistency, confidence, d_pos, d_neg;
};

inline PairTerms pair_terms(double pp, double pn, LossVariant variant) {
  const double gap = pp + pn - 1.0;
  PairTerms t{gap * gap, 0.0, 2.0 * gap, 2.0 * gap};
  double m;
  int arg;
  if (variant == LossVariant::kOriginal) {
    arg = pn < pp ? 1 : 0;
    m = arg == 0 ? pp : pn;
  } else {
    const double cand[4] = {pp, pn, 1.0 - pp, 1.0 - pn};
    arg = 0;
    for (int k = 1; k < 4; ++k)
      if (cand[k] < cand[arg]) arg = k;
    m = cand[arg];
  }
  t.confidence = m * m;
  switch (arg) {
    case 0: t.d_pos += 2.0 * m; break;
    case 1: t.d_neg += 2.0 * m; break;
    case 2: t.d_pos -= 2.0 * m; break;
    case 3: t.d_neg -= 2.0 * m; break;
  }
  return t;
}

inline Vector sigmoid_all(const Vector& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

}  // namespace detail

inline LossBreakdown ccs_loss(const LinearProbe& probe, const ContrastActivationSet& set, LossVariant variant) {
  detail::check_probe_shape(probe, set);
  const Vector pp = detail::sigmoid_all((set.pos * probe.theta).array() + probe.bias);
  const Vector pn = detail::sigmoid_all((set.neg * probe.theta).array() + probe.bias);
  LossBreakdown out;
  out.variant = variant;
  out.n_pairs = set.n_pairs();
  for (Eigen::Index i = 0; i < pp.size(); ++i) {
    const auto t = detail::pair_terms(pp(i), pn(i), variant);
    out.consistency += t.consistency;
    out.confidence += t.confidence;
  }
  out.total = out.consistency + out.confidence;
  return out;
}

// Loss averaged over pairs and its analytic gradient.
inline LossAndGradient ccs_loss_and_gradient(const LinearProbe& probe, const ContrastActivationSet& set,
                                             LossVariant variant) {
  detail::check_probe_shape(probe, set);
  const Vector pp = detail::sigmoid_all((set.pos * probe.theta).array() + probe.bias);
  const Vector pn = detail::sigmoid_all((set.neg * probe.theta).array() + probe.bias);
  const auto n = pp.size();
  Vector w_pos(n), w_neg(n);
  LossBreakdown loss;
  loss.variant = variant;
  loss.n_pairs = static_cast<std::size_t>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = detail::pair_terms(pp(i), pn(i), variant);
    loss.consistency += t.consistency;
    loss.confidence += t.confidence;
    w_pos(i) = t.d_pos * pp(i) * (1.0 - pp(i));
    w_neg(i) = t.d_neg * pn(i) * (1.0 - pn(i));
  }
  loss.total = loss.consistency + loss.confidence;
  const double inv_n = 1.0 / static_cast<double>(n);
  LossAndGradient out;
  out.loss = loss.per_pair();
  out.grad_theta = (set.pos.transpose() * w_pos + set.neg.transpose() * w_neg) * inv_n;
  out.grad_bias = (w_pos.sum() + w_neg.sum()) * inv_n;
  return out;
}

// Full-batch AdamW for exactly config.epochs steps. Returns the final probe and
// its per-pair mean loss.
inline std::pair<LinearProbe, LossBreakdown> train_ccs(const ContrastActivationSet& set, const TrainConfig& config) {
  require(set.normalized, ErrorCode::kNotNormalized, "train_ccs needs a normalized set");
  require(set.n_pairs() >= 2, ErrorCode::kInvalidArgument, "train_ccs needs at least 2 pairs");
  require(config.epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
  require(config.learning_rate > 0.0, ErrorCode::kInvalidArgument, "learning_rate must be > 0");

  LinearProbe probe = init_probe(set.dim(), config.seed);
  const auto d = probe.theta.size();
  Vector m_theta = Vector::Zero(d), v_theta = Vector::Zero(d);
  double m_bias = 0.0, v_bias = 0.0;
  double beta1_t = 1.0, beta2_t = 1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto lg = ccs_loss_and_gradient(probe, set, config.loss_variant);
    require(std::isfinite(lg.loss.total) && lg.grad_theta.allFinite() && std::isfinite(lg.grad_bias),
            ErrorCode::kNonFiniteLoss, "at epoch " + std::to_string(epoch));
    beta1_t *= config.beta1;
    beta2_t *= config.beta2;
    const double lr = config.learning_rate;
    const double c1 = 1.0 - beta1_t, c2 = 1.0 - beta2_t;

    m_theta = config.beta1 * m_theta + (1.0 - config.beta1) * lg.grad_theta;
    v_theta = config.beta2 * v_theta + (1.0 - config.beta2) * lg.grad_theta.cwiseAbs2();
    probe.theta *= 1.0 - lr * config.weight_decay;
    probe.theta.array() -= lr * (m_theta.array() / c1) / ((v_theta.array() / c2).sqrt() + config.eps);

    m_bias = config.beta1 * m_bias + (1.0 - config.beta1) * lg.grad_bias;
    v_bias = config.beta2 * v_bias + (1.0 - config.beta2) * lg.grad_bias * lg.grad_bias;
    probe.bias *= 1.0 - lr * config.weight_decay;
    probe.bias -= lr * (m_bias / c1) / (std::sqrt(v_bias / c2) + config.eps);
  }
  const auto final_loss = ccs_loss(probe, set, config.loss_variant).per_pair();
  require(std::isfinite(final_loss.total), ErrorCode::kNonFiniteLoss, "after final epoch");
  return {std::move(probe), final_loss};
}

// scores_i = [p(x+) + (1 - p(x-))] / 2
inline MethodOutput average_prediction(const LinearProbe& probe, const ContrastActivationSet& set,
                                       std::string method = "ccs", std::uint64_t seed = 0) {
  detail::check_probe_shape(probe, set);
  const Vector pp = detail::sigmoid_all((set.pos * probe.theta).array() + probe.bias);
  const Vector pn = detail::sigmoid_all((set.neg * probe.theta).array() + probe.bias);
  MethodOutput out{std::move(method), seed, std::vector<double>(set.n_pairs()), false, false, false};
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.scores[i] = 0.5 * (pp(r) + (1.0 - pn(r)));
  }
  return out;
}

// Strict threshold: a score of exactly 0.5 maps to 0.
inline BinaryVector induced_classifier(const MethodOutput& output) {
  BinaryVector f(output.scores.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = output.scores[i] > 0.5 ? 1 : 0;
  return f;
}

inline std::size_t count_matches(const BinaryVector& a, const BinaryVector& b) {
  std::size_t m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m += a[i] == b[i] ? 1 : 0;
  return m;
}

inline MethodOutput flipped(MethodOutput output) {
  for (auto& s : output.scores) s = 1.0 - s;
  output.flip = !output.flip;
  return output;
}

// Flips polarity iff accuracy against the reference is strictly below 0.5.
inline MethodOutput truth_disambiguate(const MethodOutput& output, const BinaryVector& reference) {
  require(reference.size() == output.size(), ErrorCode::kDimensionMismatch,
          "reference has " + std::to_string(reference.size()) + " entries, output has " +
              std::to_string(output.size()));
  const std::size_t correct = count_matches(induced_classifier(output), reference);
  MethodOutput out = 2 * correct < reference.size() ? flipped(output) : output;
  out.oriented = true;
  return out;
}

inline nlohmann::ordered_json to_json(const MethodOutput& out) {
  nlohmann::ordered_json j;
  j["method"] = out.method;
  j["seed"] = out.seed;
  j["flip"] = out.flip;
  j["scores"] = out.scores;
  return j;
}

inline MethodOutput method_output_from_json(const nlohmann::json& j) {
  MethodOutput out;
  try {
    out.method = j.at("method").get<std::string>();
    out.seed = j.at("seed").get<std::uint64_t>();
    out.flip = j.at("flip").get<bool>();
    out.scores = j.at("scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("method output json: ") + e.what());
  }
  out.hard = std::all_of(out.scores.begin(), out.scores.end(), [](double s) { return s == 0.0 || s == 1.0; });
  return out;
}

}  // namespace ccs
