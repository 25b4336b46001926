#include <gtest/gtest.h>

#include <cmath>

#include "ccs/baselines.hpp"
#include "ccs/synthgen.hpp"
#include "ccs/theory.hpp"

namespace ccs {
namespace {

SyntheticConfig zero_noise(std::size_t n, std::size_t d) {
  SyntheticConfig c;
  c.n_pairs = n;
  c.dim = d;
  c.noise_std = 0.0;
  c.knowledge_salience = 1.0;
  c.seed = 21;
  return c;
}

TEST(Synthgen, ZeroNoiseKnowledgeOnly) {
  const auto c = zero_noise(4, 8);
  const auto set = generate(c);
  const Vector v = planted_directions(c).col(0);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double sign = (*set.labels)[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    EXPECT_LT((set.pos.row(i).transpose() - sign * v).norm(), 1e-15);
    EXPECT_LT((set.neg.row(i).transpose() + sign * v).norm(), 1e-15);
  }
}

// pos - neg = 2k(2a-1) v_truth + 2s(2b-1) v_k for a statement-level feature;
// a question-level feature cancels.
TEST(Synthgen, PairDifferenceExpansion) {
  auto c = zero_noise(64, 16);
  c.knowledge_salience = 0.7;
  c.features = {{"stmt", 1.5, Parity::kStatementLevel, 0.5, 5}, {"word", 2.0, Parity::kQuestionLevel, 0.5, 6}};
  const auto set = generate(c);
  const Matrix dirs = planted_directions(c);
  const Matrix diff = set.pos - set.neg;
  const auto& a = *set.labels;
  const auto& b = set.features.at("stmt");
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const Vector expected = 2 * 0.7 * (2.0 * a[u] - 1) * dirs.col(0) + 2 * 1.5 * (2.0 * b[u] - 1) * dirs.col(1);
    EXPECT_LT((diff.row(i).transpose() - expected).norm(), 1e-12);
    EXPECT_NEAR(diff.row(i).dot(dirs.col(2)), 0.0, 1e-12);
  }
}

TEST(Synthgen, DirectionsAreOrthonormal) {
  auto c = zero_noise(10, 32);
  for (int k = 0; k < 6; ++k) c.features.push_back({"f" + std::to_string(k), 1.0, Parity::kStatementLevel, 0.5, 40u + k});
  const Matrix dirs = planted_directions(c);
  const Matrix gram = dirs.transpose() * dirs;
  EXPECT_LT((gram - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Synthgen, Deterministic) {
  auto c = zero_noise(50, 12);
  c.noise_std = 0.3;
  c.features = {{"x", 1.0, Parity::kStatementLevel, 0.3, 1}};
  const auto a = generate(c), b = generate(c);
  EXPECT_EQ(a.pos, b.pos);
  EXPECT_EQ(a.neg, b.neg);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.features, b.features);
  c.seed += 1;
  EXPECT_NE(generate(c).pos, a.pos);
}

TEST(Synthgen, BalanceFlagGivesExactCounts) {
  auto c = zero_noise(101, 8);
  c.balance = true;
  c.features = {{"x", 1.0, Parity::kStatementLevel, 0.3, 1}};
  const auto set = generate(c);
  EXPECT_EQ(std::count(set.labels->begin(), set.labels->end(), 1), 51);  // llround(50.5)
  EXPECT_EQ(std::count(set.features.at("x").begin(), set.features.at("x").end(), 1), 30);
}

TEST(Synthgen, ConfigValidation) {
  auto c = zero_noise(10, 2);  // truth + 1 feature needs dim >= 3
  c.features = {{"x", 1.0, Parity::kStatementLevel, 0.5, 1}};
  EXPECT_THROW(generate(c), Error);
  c.dim = 3;
  EXPECT_NO_THROW(generate(c));
  c.noise_std = -1.0;
  EXPECT_THROW(generate(c), Error);
  c.noise_std = 0.0;
  c.features.push_back(c.features.front());
  EXPECT_THROW(generate(c), Error);
  c.features = {{"truth", 1.0, Parity::kStatementLevel, 0.5, 1}};
  EXPECT_THROW(generate(c), Error);
  c.features = {{"x", 1.0, Parity::kStatementLevel, 1.5, 1}};
  EXPECT_THROW(generate(c), Error);
}

TEST(Synthgen, PlantedOracle) {
  auto c = zero_noise(30, 8);
  c.features = {{"distractor", 2.0, Parity::kStatementLevel, 0.5, 9}};
  const auto set = generate(c);
  EXPECT_EQ(planted_oracle(c, set, "distractor"), set.features.at("distractor"));
  EXPECT_EQ(planted_oracle(c, set, "truth"), *set.labels);
  try {
    planted_oracle(c, set, "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownFeature);
  }
  EXPECT_EQ(planted_oracle(c, set).size(), 2u);
}

// The top principal direction of the pair differences follows whichever
// planted direction carries the largest salience.
TEST(Synthgen, SalienceMonotonicity) {
  for (const auto& [knowledge, distractor] : {std::pair{3.0, 1.0}, std::pair{1.0, 3.0}, std::pair{1.0, 1.5}}) {
    auto c = zero_noise(400, 20);
    c.knowledge_salience = knowledge;
    c.features = {{"d", distractor, Parity::kStatementLevel, 0.5, 3}};
    const auto set = generate(c);
    const Matrix dirs = planted_directions(c);
    const PcaModel pca = fit_pca(set.pos - set.neg, 1);
    const Vector expected = knowledge > distractor ? dirs.col(0) : dirs.col(1);
    EXPECT_GE(std::abs(pca.components.col(0).dot(expected)), 0.99) << knowledge << " vs " << distractor;
  }
}

// At zero noise a large-norm linear probe along +-v reaches loss near 0 for both
// the truth feature and the statement-level distractor.
TEST(Synthgen, OptimalLossReachableForTruthAndDistractor) {
  auto c = zero_noise(100, 10);
  c.features = {{"d", 3.0, Parity::kStatementLevel, 0.5, 3}};
  auto set = generate(c);
  set.normalized = true;
  const Matrix dirs = planted_directions(c);
  for (Eigen::Index k = 0; k < 2; ++k) {
    const double salience = k == 0 ? 1.0 : 3.0;
    double previous = 1.0;
    for (double scale : {5.0, 10.0, 20.0}) {
      const LinearProbe probe{dirs.col(k) * (scale / salience), 0.0};
      const double loss = ccs_loss(probe, set, LossVariant::kSymmetric).per_pair().total;
      EXPECT_LT(loss, previous);
      previous = loss;
    }
    EXPECT_LT(previous, 1e-15);
    const LinearProbe probe{dirs.col(k) * (20.0 / salience), 0.0};
    const BinaryVector f = induced_classifier(average_prediction(probe, set));
    EXPECT_EQ(f, k == 0 ? *set.labels : set.features.at("d"));
  }
}

}  // namespace
}  // namespace ccs
