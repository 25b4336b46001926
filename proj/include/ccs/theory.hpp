#pragma once

// Numerical checks of the CCS identifiability results on probes given as
// value tables (arbitrary outputs in [0,1], no sigmoid parameterization).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccs/core.hpp"
#include "ccs/probes.hpp"
#include "ccs/rng.hpp"

namespace ccs {

struct ValueProbe {
  std::vector<double> pos_vals;  // p(x_i+)
  std::vector<double> neg_vals;  // p(x_i-)

  std::size_t size() const { return pos_vals.size(); }
};

inline void validate(const ValueProbe& p) {
  require(p.pos_vals.size() == p.neg_vals.size(), ErrorCode::kDimensionMismatch, "pos/neg value lengths differ");
  auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
  require(std::all_of(p.pos_vals.begin(), p.pos_vals.end(), in_range) &&
              std::all_of(p.neg_vals.begin(), p.neg_vals.end(), in_range),
          ErrorCode::kInvalidArgument, "probe values must lie in [0,1]");
}

// Continuous exclusive or: (1 - a) b + (1 - b) a.
inline double xor_continuous(double a, double b) {
  require(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0, ErrorCode::kInvalidArgument,
          "xor arguments must lie in [0,1]");
  return (1.0 - a) * b + (1.0 - b) * a;
}

using XorFn = std::function<double(double, double)>;

inline LossBreakdown value_loss(const ValueProbe& p, LossVariant variant) {
  validate(p);
  LossBreakdown out;
  out.variant = variant;
  out.n_pairs = p.size();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p.pos_vals[i], b = p.neg_vals[i];
    const double c = a - (1.0 - b);
    double m = std::min(a, b);
    if (variant == LossVariant::kSymmetric) m = std::min({m, 1.0 - a, 1.0 - b});
    out.consistency += c * c;
    out.confidence += m * m;
  }
  out.total = out.consistency + out.confidence;
  return out;
}

inline std::vector<double> average_prediction(const ValueProbe& p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = (p.pos_vals[i] + (1.0 - p.neg_vals[i])) / 2.0;
  return out;
}

inline BinaryVector induced_classifier(const ValueProbe& p) {
  const auto avg = average_prediction(p);
  BinaryVector f(avg.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = avg[i] > 0.5 ? 1 : 0;
  return f;
}

// Tabulates a sigmoid-linear probe on a set.
inline ValueProbe tabulate(const LinearProbe& probe, const ContrastActivationSet& set) {
  ValueProbe out{std::vector<double>(set.n_pairs()), std::vector<double>(set.n_pairs())};
  for (std::size_t i = 0; i < set.n_pairs(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.pos_vals[i] = sigmoid(probe.theta.dot(set.pos.row(r).transpose()) + probe.bias);
    out.neg_vals[i] = sigmoid(probe.theta.dot(set.neg.row(r).transpose()) + probe.bias);
  }
  return out;
}

// Optimal-loss probe inducing an arbitrary binary feature h.
inline ValueProbe thm1_probe(const BinaryVector& h) {
  require(is_binary(h), ErrorCode::kInvalidArgument, "h must be binary");
  ValueProbe p{std::vector<double>(h.size()), std::vector<double>(h.size())};
  for (std::size_t i = 0; i < h.size(); ++i) {
    p.pos_vals[i] = h[i];
    p.neg_vals[i] = 1.0 - h[i];
  }
  return p;
}

// p'(x_i+-) = p(x_i+-) xor h(q_i)
inline ValueProbe lemma1_transform(const ValueProbe& p, const BinaryVector& h, const XorFn& xr = xor_continuous) {
  validate(p);
  require(h.size() == p.size(), ErrorCode::kDimensionMismatch, "h length differs from probe");
  require(is_binary(h), ErrorCode::kInvalidArgument, "h must be binary");
  ValueProbe out = p;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.pos_vals[i] = xr(p.pos_vals[i], h[i]);
    out.neg_vals[i] = xr(p.neg_vals[i], h[i]);
  }
  return out;
}

// p'(x_i+-) = p(x_i+-) xor [f_p(q_i) xor g(q_i)]
inline ValueProbe thm2_transform(const ValueProbe& p, const BinaryVector& g, const XorFn& xr = xor_continuous) {
  validate(p);
  require(g.size() == p.size(), ErrorCode::kDimensionMismatch, "g length differs from probe");
  require(is_binary(g), ErrorCode::kInvalidArgument, "g must be binary");
  const BinaryVector f = induced_classifier(p);
  BinaryVector shift(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) shift[i] = static_cast<std::uint8_t>(std::lround(xr(f[i], g[i])));
  return lemma1_transform(p, shift, xr);
}

// Per-pair loss of the constant probe p == k.
inline double constant_probe_loss(double k, LossVariant variant) {
  require(k >= 0.0 && k <= 1.0, ErrorCode::kInvalidArgument, "k must lie in [0,1]");
  const double c = 2.0 * k - 1.0;
  const double m = variant == LossVariant::kOriginal ? k : std::min(k, 1.0 - k);
  return c * c + m * m;
}

struct GridMinimum {
  double value = 0.0;
  std::vector<double> argmins;  // grid points within tol of the minimum
};

inline GridMinimum constant_probe_grid_minimum(LossVariant variant, double step = 1e-4, double tol = 1e-12) {
  const auto steps = static_cast<long>(std::lround(1.0 / step));
  std::vector<double> vals(static_cast<std::size_t>(steps + 1));
  for (long i = 0; i <= steps; ++i) vals[static_cast<std::size_t>(i)] = constant_probe_loss(static_cast<double>(i) / steps, variant);
  GridMinimum out;
  out.value = *std::min_element(vals.begin(), vals.end());
  for (long i = 0; i <= steps; ++i)
    if (vals[static_cast<std::size_t>(i)] <= out.value + tol) out.argmins.push_back(static_cast<double>(i) / steps);
  return out;
}

// ---------------------------------------------------------------------------
// Randomized verification harness

struct TheoremCheck {
  std::string name;
  std::size_t trials = 0;
  std::size_t failures = 0;
  nlohmann::json counterexample;  // first failure, null if none

  bool passed() const { return failures == 0; }
};

struct TheoremReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<TheoremCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const TheoremCheck& c) { return c.passed(); });
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["passed"] = passed();
    j["trials"] = trials;
    j["seed"] = seed;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json cj;
      cj["name"] = c.name;
      cj["passed"] = c.passed();
      cj["trials"] = c.trials;
      cj["failures"] = c.failures;
      cj["counterexample"] = c.counterexample;
      j["checks"].push_back(cj);
    }
    return j;
  }
};

inline constexpr double kLossPreservationTol = 1e-12;

namespace detail {

inline BinaryVector random_bits(Rng& rng, std::size_t n) {
  BinaryVector b(n);
  for (auto& x : b) x = bernoulli(rng, 0.5) ? 1 : 0;
  return b;
}

// Probe values mixing uniform draws, exact special values and points within
// 1e-6 of 0.5. When avoid_ties is set, rows whose averaged prediction sits
// exactly on the 0.5 threshold are redrawn.
inline ValueProbe random_value_probe(Rng& rng, std::size_t n, bool avoid_ties) {
  auto draw = [&rng](bool allow_special) {
    const double u = uniform01(rng);
    if (allow_special && u < 0.1) {
      static constexpr double kSpecial[] = {0.0, 1.0, 0.5, 0.25, 0.75};
      return kSpecial[uniform_index(rng, 5)];
    }
    if (u < 0.3) return 0.5 + (uniform01(rng) - 0.5) * 2e-6;
    return uniform01(rng);
  };
  ValueProbe p{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    do {
      p.pos_vals[i] = draw(!avoid_ties);
      p.neg_vals[i] = draw(!avoid_ties);
    } while (avoid_ties && std::abs(p.pos_vals[i] - p.neg_vals[i]) < 1e-12);
  }
  return p;
}

inline nlohmann::json dump(const ValueProbe& p) {
  return {{"pos_vals", p.pos_vals}, {"neg_vals", p.neg_vals}};
}

inline void record(TheoremCheck& check, bool ok, const std::function<nlohmann::json()>& example) {
  ++check.trials;
  if (ok) return;
  if (check.failures++ == 0) check.counterexample = example();
}

// An exception inside a trial counts as a failure of `check`.
template <class Body>
void guarded(TheoremCheck& check, Body&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    record(check, false, [&] { return nlohmann::json{{"exception", e.what()}}; });
  }
}

}  // namespace detail

// Runs every randomized identity check `trials` times with n <= 64. The xor
// implementation is injectable so the harness itself can be tested.
inline TheoremReport verify_theorems(std::size_t trials, std::uint64_t seed, const XorFn& xr = xor_continuous) {
  require(trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  TheoremReport report;
  report.trials = trials;
  report.seed = seed;
  TheoremCheck xor_algebra{"xor_algebra"}, thm1{"theorem1_optimal_probe"}, lemma_loss{"lemma1_loss_preserved"},
      lemma_cls{"lemma1_induced_classifier"}, lemma_orig{"lemma1_original_loss_h_zero"},
      thm2_loss{"theorem2_loss_preserved"}, thm2_cls{"theorem2_induces_g"}, constant{"constant_probe_minimizers"};

  Rng rng = make_rng(derive_seed(seed, "verify_theorems", 0));
  auto safe_xor = [&xr](double a, double b) {
    const double v = xr(a, b);
    return std::clamp(v, 0.0, 1.0);
  };

  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 64);

    detail::guarded(xor_algebra, [&] {
      const double a = uniform01(rng), b = uniform01(rng);
      const int x = bernoulli(rng, 0.5), y = bernoulli(rng, 0.5), z = bernoulli(rng, 0.5);
      const bool ok = std::abs(xr(a, b) - xr(b, a)) <= 1e-15 && std::abs(xr(a, 0.0) - a) <= 1e-15 &&
                      std::abs(xr(a, 1.0) - (1.0 - a)) <= 1e-15 && xr(x, y) == static_cast<double>(x ^ y) &&
                      xr(xr(x, y), z) == xr(x, xr(y, z)) && xr(xr(x, y), y) == static_cast<double>(x);
      detail::record(xor_algebra, ok, [&] {
        return nlohmann::json{{"a", a}, {"b", b}, {"a_xor_b", xr(a, b)}, {"b_xor_a", xr(b, a)},
                              {"a_xor_0", xr(a, 0.0)}, {"a_xor_1", xr(a, 1.0)}, {"x", x}, {"y", y}, {"z", z}};
      });
    });

    detail::guarded(thm1, [&] {
      const BinaryVector h = detail::random_bits(rng, n);
      const ValueProbe p = thm1_probe(h);
      const auto lo = value_loss(p, LossVariant::kOriginal);
      const auto ls = value_loss(p, LossVariant::kSymmetric);
      const auto avg = average_prediction(p);
      bool ok = lo.total == 0.0 && ls.total == 0.0;
      for (std::size_t i = 0; i < n; ++i) ok = ok && avg[i] == static_cast<double>(h[i]);
      detail::record(thm1, ok, [&] {
        return nlohmann::json{{"h", h}, {"loss_original", lo.total}, {"loss_symmetric", ls.total}, {"avg", avg}};
      });
    });

    detail::guarded(lemma_loss, [&] {
      const ValueProbe p = detail::random_value_probe(rng, n, false);
      const BinaryVector h = detail::random_bits(rng, n);
      const ValueProbe q = lemma1_transform(p, h, safe_xor);
      const double before = value_loss(p, LossVariant::kSymmetric).total;
      const double after = value_loss(q, LossVariant::kSymmetric).total;
      detail::record(lemma_loss, std::abs(before - after) <= kLossPreservationTol, [&] {
        return nlohmann::json{{"probe", detail::dump(p)}, {"h", h}, {"loss_before", before}, {"loss_after", after}};
      });

      const BinaryVector zero(n, 0);
      const ValueProbe same = lemma1_transform(p, zero, safe_xor);
      const double orig_before = value_loss(p, LossVariant::kOriginal).total;
      const double orig_after = value_loss(same, LossVariant::kOriginal).total;
      detail::record(lemma_orig, std::abs(orig_before - orig_after) <= kLossPreservationTol, [&] {
        return nlohmann::json{{"probe", detail::dump(p)}, {"loss_before", orig_before}, {"loss_after", orig_after}};
      });

      const ValueProbe pn = detail::random_value_probe(rng, n, true);
      const ValueProbe qn = lemma1_transform(pn, h, safe_xor);
      const BinaryVector fp = induced_classifier(pn), fq = induced_classifier(qn);
      bool ok = true;
      for (std::size_t i = 0; i < n; ++i) ok = ok && fq[i] == (fp[i] ^ h[i]);
      detail::record(lemma_cls, ok, [&] {
        return nlohmann::json{{"probe", detail::dump(pn)}, {"h", h}, {"f_p", fp}, {"f_transformed", fq}};
      });
    });

    detail::guarded(thm2_loss, [&] {
      const ValueProbe p = detail::random_value_probe(rng, n, false);
      const BinaryVector g = detail::random_bits(rng, n);
      const ValueProbe q = thm2_transform(p, g, safe_xor);
      const double before = value_loss(p, LossVariant::kSymmetric).total;
      const double after = value_loss(q, LossVariant::kSymmetric).total;
      detail::record(thm2_loss, std::abs(before - after) <= kLossPreservationTol, [&] {
        return nlohmann::json{{"probe", detail::dump(p)}, {"g", g}, {"loss_before", before}, {"loss_after", after}};
      });

      const ValueProbe pn = detail::random_value_probe(rng, n, true);
      const ValueProbe qn = thm2_transform(pn, g, safe_xor);
      const BinaryVector fq = induced_classifier(qn);
      const double loss_p = value_loss(pn, LossVariant::kSymmetric).total;
      const double loss_q = value_loss(qn, LossVariant::kSymmetric).total;
      detail::record(thm2_cls, fq == g && std::abs(loss_p - loss_q) <= kLossPreservationTol, [&] {
        return nlohmann::json{{"probe", detail::dump(pn)}, {"g", g}, {"f_transformed", fq},
                              {"loss_before", loss_p}, {"loss_after", loss_q}};
      });
    });
  }

  const auto gmo = constant_probe_grid_minimum(LossVariant::kOriginal);
  const auto gms = constant_probe_grid_minimum(LossVariant::kSymmetric);
  const bool const_ok = gmo.argmins.size() == 1 && std::abs(gmo.argmins[0] - 0.4) < 1e-12 && gms.argmins.size() == 2 &&
                        std::abs(gms.argmins[0] - 0.4) < 1e-12 && std::abs(gms.argmins[1] - 0.6) < 1e-12 &&
                        std::abs(gmo.value - 0.2) <= 1e-9 && std::abs(gms.value - 0.2) <= 1e-9;
  detail::record(constant, const_ok, [&] {
    return nlohmann::json{{"original_argmins", gmo.argmins}, {"original_min", gmo.value},
                          {"symmetric_argmins", gms.argmins}, {"symmetric_min", gms.value}};
  });

  report.checks = {xor_algebra, thm1, lemma_loss, lemma_cls, lemma_orig, thm2_loss, thm2_cls, constant};
  return report;
}

}  // namespace ccs
