#pragma once

// Synthetic contrast pairs with planted binary features.
//
// Each statement gets  knowledge * (2t - 1) * v_truth + sum_k s_k * (2c_k - 1) * v_k + noise,
// where t says whether the inserted label matches the answer. A statement-level
// feature flips between x+ and x- (it survives the pair difference); a
// question-level feature is identical on both sides (it cancels).

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "ccs/activation_store.hpp"
#include "ccs/core.hpp"
#include "ccs/rng.hpp"

namespace ccs {

enum class Parity { kStatementLevel, kQuestionLevel };

inline const char* to_string(Parity p) {
  return p == Parity::kStatementLevel ? "statement_level" : "question_level";
}

inline Parity parse_parity(const std::string& s) {
  if (s == "statement_level") return Parity::kStatementLevel;
  if (s == "question_level") return Parity::kQuestionLevel;
  throw Error(ErrorCode::kInvalidArgument, "unknown parity '" + s + "'");
}

struct PlantedFeature {
  std::string name;
  double salience = 1.0;
  Parity parity = Parity::kStatementLevel;
  double prob = 0.5;
  std::uint64_t direction_seed = 0;
};

struct SyntheticConfig {
  std::size_t n_pairs = 1000;
  std::size_t dim = 128;
  double noise_std = 0.5;
  double knowledge_salience = 1.0;
  std::vector<PlantedFeature> features;
  std::uint64_t seed = 0;
  // Exact class balance (round(prob * n) ones, shuffled) instead of i.i.d. draws.
  bool balance = false;
};

inline constexpr const char* kTruthTarget = "truth";

inline void validate(const SyntheticConfig& config) {
  require(config.n_pairs >= 1, ErrorCode::kInvalidArgument, "n_pairs must be >= 1");
  require(config.noise_std >= 0.0, ErrorCode::kInvalidArgument, "noise_std must be nonnegative");
  require(config.knowledge_salience >= 0.0, ErrorCode::kInvalidArgument,
          "knowledge_salience must be nonnegative");
  const std::size_t planted = 1 + config.features.size();
  require(config.dim >= planted + 1, ErrorCode::kInvalidArgument,
          "dim " + std::to_string(config.dim) + " too small for " + std::to_string(planted) +
              " orthogonal planted directions");
  std::set<std::string> names;
  for (const auto& f : config.features) {
    require(!f.name.empty() && f.name != kTruthTarget, ErrorCode::kInvalidArgument,
            "feature name '" + f.name + "' is reserved or empty");
    require(names.insert(f.name).second, ErrorCode::kInvalidArgument,
            "duplicate feature name '" + f.name + "'");
    require(f.salience >= 0.0, ErrorCode::kInvalidArgument, "salience must be nonnegative");
    require(f.prob >= 0.0 && f.prob <= 1.0, ErrorCode::kInvalidArgument, "prob must lie in [0,1]");
  }
}

// Orthonormal planted directions: column 0 is v_truth, column k+1 belongs to
// features[k]. Gram-Schmidt (two passes) over seeded Gaussian draws.
inline Matrix planted_directions(const SyntheticConfig& config) {
  validate(config);
  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto m = static_cast<Eigen::Index>(1 + config.features.size());
  Matrix dirs(d, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const std::uint64_t seed =
        k == 0 ? derive_seed(config.seed, "direction:truth", 0)
               : derive_seed(config.features[k - 1].direction_seed, "direction:" + config.features[k - 1].name, 0);
    Rng rng = make_rng(seed);
    Gaussian gauss;
    Vector v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = gauss(rng);
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index p = 0; p < k; ++p) v -= dirs.col(p).dot(v) * dirs.col(p);
    const double norm = v.norm();
    require(norm > 1e-8, ErrorCode::kInvalidArgument, "degenerate planted direction draw");
    dirs.col(k) = v / norm;
  }
  return dirs;
}

namespace detail {

inline BinaryVector draw_bits(Rng& rng, std::size_t n, double prob, bool balance) {
  BinaryVector bits(n, 0);
  if (!balance) {
    for (auto& b : bits) b = bernoulli(rng, prob) ? 1 : 0;
    return bits;
  }
  const auto ones = static_cast<std::size_t>(std::llround(prob * static_cast<double>(n)));
  std::fill(bits.begin(), bits.begin() + static_cast<std::ptrdiff_t>(ones), 1);
  for (std::size_t i = n; i > 1; --i) std::swap(bits[i - 1], bits[uniform_index(rng, i)]);
  return bits;
}

}  // namespace detail

inline ContrastActivationSet generate(const SyntheticConfig& config) {
  validate(config);
  const Matrix dirs = planted_directions(config);
  const std::size_t n = config.n_pairs;
  const auto d = static_cast<Eigen::Index>(config.dim);

  Rng label_rng = make_rng(derive_seed(config.seed, "labels", 0));
  ContrastActivationSet set;
  set.labels = detail::draw_bits(label_rng, n, 0.5, config.balance);
  std::vector<BinaryVector> bits;
  for (std::size_t k = 0; k < config.features.size(); ++k) {
    Rng rng = make_rng(derive_seed(config.seed, "bits:" + config.features[k].name, k));
    bits.push_back(detail::draw_bits(rng, n, config.features[k].prob, config.balance));
    set.features[config.features[k].name] = bits.back();
  }

  Rng noise_rng = make_rng(derive_seed(config.seed, "noise", 0));
  Gaussian gauss;
  set.pos.resize(static_cast<Eigen::Index>(n), d);
  set.neg.resize(static_cast<Eigen::Index>(n), d);
  const auto& a = *set.labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (int side = 1; side >= 0; --side) {  // side 1 = inserted positive label
      const int truth = a[i] == side ? 1 : 0;
      Vector phi = config.knowledge_salience * (2.0 * truth - 1.0) * dirs.col(0);
      for (std::size_t k = 0; k < config.features.size(); ++k) {
        const auto& f = config.features[k];
        int c = bits[k][i];
        if (f.parity == Parity::kStatementLevel) c ^= (1 - side);
        phi += f.salience * (2.0 * c - 1.0) * dirs.col(static_cast<Eigen::Index>(k + 1));
      }
      for (Eigen::Index j = 0; j < d; ++j) phi(j) += config.noise_std * gauss(noise_rng);
      (side == 1 ? set.pos : set.neg).row(static_cast<Eigen::Index>(i)) = phi.transpose();
    }
  }
  return set;
}

// Ground-truth bit vectors for evaluation. "truth" aliases the label vector.
inline BinaryVector planted_oracle(const SyntheticConfig& config, const ContrastActivationSet& set,
                                   const std::string& name) {
  if (name == kTruthTarget) {
    require(set.labels.has_value(), ErrorCode::kUnknownFeature, "set carries no labels");
    return *set.labels;
  }
  const bool configured = std::any_of(config.features.begin(), config.features.end(),
                                      [&](const PlantedFeature& f) { return f.name == name; });
  const auto it = set.features.find(name);
  require(configured && it != set.features.end(), ErrorCode::kUnknownFeature,
          "no planted feature named '" + name + "'");
  return it->second;
}

inline std::map<std::string, BinaryVector> planted_oracle(const SyntheticConfig& config,
                                                          const ContrastActivationSet& set) {
  std::map<std::string, BinaryVector> out;
  out[kTruthTarget] = planted_oracle(config, set, kTruthTarget);
  for (const auto& f : config.features) out[f.name] = planted_oracle(config, set, f.name);
  return out;
}

}  // namespace ccs
