#pragma once

// Unsupervised and reference baselines on contrast pairs: CRC-TPC (top
// principal component of pair differences), 2-means, a supervised logistic
// regression ceiling and an untrained random probe floor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "ccs/activation_store.hpp"
#include "ccs/core.hpp"
#include "ccs/probes.hpp"
#include "ccs/rng.hpp"

namespace ccs {

inline Matrix diff_features(const ContrastActivationSet& set) { return set.pos - set.neg; }

// Row i is [pos_i | neg_i].
inline Matrix concat_features(const ContrastActivationSet& set) {
  Matrix out(set.pos.rows(), 2 * set.pos.cols());
  out << set.pos, set.neg;
  return out;
}

// ---------------------------------------------------------------------------
// CRC-TPC

struct PcaModel {
  Matrix components;  // d x k, orthonormal columns, k = min(3, d)
  Vector explained;   // k variances, descending
  Vector center;      // mean of the difference rows
};

struct PcaOptions {
  std::size_t n_components = 3;
  std::size_t iterations = 50;
  std::size_t oversampling = 4;
};

namespace detail {

inline Matrix orthonormalize(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

}  // namespace detail

// Seeded randomized subspace iteration on the covariance of the centered rows,
// followed by a Rayleigh-Ritz step.
inline PcaModel fit_pca(const Matrix& data, std::uint64_t seed, const PcaOptions& opts = {}) {
  const auto n = data.rows();
  const auto d = data.cols();
  require(n >= 1 && d >= 1, ErrorCode::kShapeMismatch, "empty data");
  PcaModel model;
  model.center = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - model.center.transpose();
  const double scale = std::max(1.0, data.cwiseAbs().maxCoeff());
  require(centered.cwiseAbs().maxCoeff() > 1e-12 * scale, ErrorCode::kRankDeficient,
          "all difference rows are identical");

  const auto k = static_cast<Eigen::Index>(std::min<std::size_t>(opts.n_components, static_cast<std::size_t>(d)));
  const auto block = static_cast<Eigen::Index>(std::min<std::size_t>(opts.n_components + opts.oversampling,
                                                                     static_cast<std::size_t>(d)));
  Rng rng = make_rng(derive_seed(seed, "pca", 0));
  Gaussian gauss;
  Matrix q(d, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < d; ++i) q(i, j) = gauss(rng);
  q = detail::orthonormalize(q);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < opts.iterations; ++it)
    q = detail::orthonormalize(centered.transpose() * (centered * q) * inv_n);

  const Matrix projected = centered * q;
  const Matrix small = projected.transpose() * projected * inv_n;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(small);
  // Eigen sorts ascending.
  model.components.resize(d, k);
  model.explained.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index src = block - 1 - c;
    Vector comp = q * eig.eigenvectors().col(src);
    comp.normalize();
    Eigen::Index arg;
    comp.cwiseAbs().maxCoeff(&arg);
    if (comp(arg) < 0) comp = -comp;
    model.components.col(c) = comp;
    model.explained(c) = std::max(0.0, eig.eigenvalues()(src));
  }
  return model;
}

// n x k coordinates of the centered rows in the component basis.
inline Matrix pca_project(const PcaModel& model, const Matrix& data) {
  return (data.rowwise() - model.center.transpose()) * model.components;
}

inline std::pair<PcaModel, MethodOutput> crc_tpc_fit(const Matrix& diffs, std::uint64_t seed) {
  require(diffs.rows() >= 3, ErrorCode::kInvalidArgument, "CRC-TPC needs at least 3 rows");
  PcaModel model = fit_pca(diffs, seed);
  const Vector proj = pca_project(model, diffs).col(0);
  MethodOutput out{"pca", seed, std::vector<double>(static_cast<std::size_t>(proj.size())), true, false, false};
  for (Eigen::Index i = 0; i < proj.size(); ++i) out.scores[static_cast<std::size_t>(i)] = proj(i) > 0.0 ? 1.0 : 0.0;
  return {std::move(model), std::move(out)};
}

inline void write_pca_coordinates_csv(const PcaModel& model, const Matrix& diffs, const std::string& path) {
  const Matrix coords = pca_project(model, diffs);
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path);
  out << "index";
  for (Eigen::Index c = 0; c < coords.cols(); ++c) out << ",pc" << (c + 1);
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    out << i;
    for (Eigen::Index c = 0; c < coords.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", coords(i, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// k-means, k = 2

struct KMeansModel {
  Matrix centroids;  // 2 x d
  BinaryVector assignment;
  std::size_t iterations = 0;
};

inline constexpr std::size_t kKMeansMaxIterations = 300;

inline std::pair<KMeansModel, MethodOutput> kmeans_fit(const Matrix& diffs, std::uint64_t seed) {
  const auto n = diffs.rows();
  require(n >= 2, ErrorCode::kInvalidArgument, "k-means needs at least 2 rows");

  Rng rng = make_rng(derive_seed(seed, "kmeans", 0));
  const auto first = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  std::vector<Eigen::Index> distinct;
  for (Eigen::Index i = 0; i < n; ++i)
    if (diffs.row(i) != diffs.row(first)) distinct.push_back(i);
  const Eigen::Index second =
      distinct.empty() ? first : distinct[uniform_index(rng, static_cast<std::uint64_t>(distinct.size()))];

  KMeansModel model;
  model.centroids.resize(2, diffs.cols());
  model.centroids.row(0) = diffs.row(first);
  model.centroids.row(1) = diffs.row(second);
  model.assignment.assign(static_cast<std::size_t>(n), 0);

  auto assign = [&](BinaryVector& a) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d0 = (diffs.row(i) - model.centroids.row(0)).squaredNorm();
      const double d1 = (diffs.row(i) - model.centroids.row(1)).squaredNorm();
      a[static_cast<std::size_t>(i)] = d1 < d0 ? 1 : 0;  // ties go to cluster 0
    }
  };

  assign(model.assignment);
  for (std::size_t it = 1; it <= kKMeansMaxIterations; ++it) {
    model.iterations = it;
    for (int c = 0; c < 2; ++c) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(diffs.cols());
      std::size_t count = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (model.assignment[static_cast<std::size_t>(i)] == c) {
          sum += diffs.row(i);
          ++count;
        }
      if (count > 0) {
        model.centroids.row(c) = sum / static_cast<double>(count);
        continue;
      }
      // Empty cluster: move the point farthest from its own centroid, unless
      // every point already sits on a centroid (degenerate data).
      double worst = 0.0;
      Eigen::Index arg = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dist = (diffs.row(i) - model.centroids.row(model.assignment[static_cast<std::size_t>(i)])).squaredNorm();
        if (dist > worst) {
          worst = dist;
          arg = i;
        }
      }
      if (arg >= 0) model.centroids.row(c) = diffs.row(arg);
    }
    BinaryVector next(model.assignment.size());
    assign(next);
    if (next == model.assignment) break;
    model.assignment = std::move(next);
  }

  MethodOutput out{"kmeans", seed, std::vector<double>(model.assignment.begin(), model.assignment.end()), true,
                   false, false};
  return {std::move(model), std::move(out)};
}

// ---------------------------------------------------------------------------
// Logistic regression ceiling

struct LogRegOptions {
  double l2 = 1.0;
  double grad_tol = 1e-6;
  std::size_t max_iterations = 1000;
};

struct LogRegModel {
  Vector weights;
  double bias = 0.0;
  std::size_t iterations = 0;
  double grad_norm = 0.0;
};

namespace detail {

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace detail

// Minimizes (1/n) sum_i logloss_i + l2/(2n) |w|^2 (bias unpenalized) by
// gradient descent with Armijo backtracking.
inline LogRegModel logreg_train(const Matrix& x, const BinaryVector& labels, const LogRegOptions& opts = {}) {
  const auto n = x.rows();
  require(static_cast<std::size_t>(n) == labels.size(), ErrorCode::kDimensionMismatch, "label length");
  require(is_binary(labels), ErrorCode::kNonBinaryLabel, "labels must be 0 or 1");
  const auto ones = std::count(labels.begin(), labels.end(), 1);
  require(ones > 0 && ones < n, ErrorCode::kInvalidArgument, "logistic regression needs both classes");

  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Vector& w, double b) {
    const Vector z = (x * w).array() + b;
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) f += detail::softplus(z(i)) - y(i) * z(i);
    return f * inv_n + 0.5 * opts.l2 * inv_n * w.squaredNorm();
  };

  LogRegModel model{Vector::Zero(x.cols()), 0.0, 0, 0.0};
  double f = objective(model.weights, model.bias);
  double step = 1.0;
  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    const Vector z = (x * model.weights).array() + model.bias;
    const Vector r = detail::sigmoid_all(z) - y;
    const Vector gw = x.transpose() * r * inv_n + opts.l2 * inv_n * model.weights;
    const double gb = r.sum() * inv_n;
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    model.grad_norm = std::sqrt(gnorm2);
    if (model.grad_norm < opts.grad_tol) break;

    step *= 2.0;
    Vector w_next;
    double b_next, f_next;
    for (;;) {
      w_next = model.weights - step * gw;
      b_next = model.bias - step * gb;
      f_next = objective(w_next, b_next);
      if (f_next <= f - 0.5 * step * gnorm2 || step < 1e-20) break;
      step *= 0.5;
    }
    model.weights = std::move(w_next);
    model.bias = b_next;
    f = f_next;
    model.iterations = it + 1;
  }
  return model;
}

inline MethodOutput logreg_fit(const Matrix& concat, const BinaryVector& labels, const LogRegOptions& opts = {}) {
  const LogRegModel model = logreg_train(concat, labels, opts);
  const Vector p = detail::sigmoid_all((concat * model.weights).array() + model.bias);
  MethodOutput out{"logreg", 0, std::vector<double>(p.data(), p.data() + p.size()), false, true, false};
  return out;
}

// ---------------------------------------------------------------------------
// Random probe floor

inline MethodOutput random_probe_baseline(const ContrastActivationSet& set, std::uint64_t seed) {
  return average_prediction(init_probe(set.dim(), seed), set, "random", seed);
}

}  // namespace ccs
