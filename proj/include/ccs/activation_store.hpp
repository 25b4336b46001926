#pragma once

// Contrastive activation sets: in-memory representation, on-disk directory
// format and per-template normalization.
//
// Directory layout (all binaries little-endian, row-major):
//   manifest.json       {format_version, n_pairs, dim, groups, has_labels, feature_names}
//   pos.f32, neg.f32    n_pairs x dim float32
//   labels.u8           one byte per question, present iff has_labels
//   feature_<name>.u8   one byte per question
//   group.u16           uint16 per question; omitted means every row is group 0

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccs/core.hpp"

namespace ccs {

struct ContrastActivationSet {
  Matrix pos;  // phi(x+) rows
  Matrix neg;  // phi(x-) rows
  std::optional<BinaryVector> labels;
  std::map<std::string, BinaryVector> features;
  std::vector<std::uint16_t> group;        // empty means all rows in group 0
  std::vector<std::string> group_names{"default"};
  bool normalized = false;

  std::size_t n_pairs() const { return static_cast<std::size_t>(pos.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(pos.cols()); }
  std::size_t n_groups() const { return group_names.size(); }
  std::uint16_t group_of(std::size_t row) const { return group.empty() ? 0 : group[row]; }
};

// Throws on any violated invariant of the set.
inline void validate(const ContrastActivationSet& set) {
  require(set.pos.rows() >= 1 && set.pos.cols() >= 1, ErrorCode::kShapeMismatch,
          "activation set must have n >= 1 and d >= 1");
  require(set.pos.rows() == set.neg.rows() && set.pos.cols() == set.neg.cols(),
          ErrorCode::kShapeMismatch, "pos and neg shapes differ");
  require(set.pos.allFinite() && set.neg.allFinite(), ErrorCode::kNonFiniteActivation,
          "activation matrix contains NaN or infinity");
  const std::size_t n = set.n_pairs();
  if (set.labels) {
    require(set.labels->size() == n, ErrorCode::kShapeMismatch, "label vector length");
    require(is_binary(*set.labels), ErrorCode::kNonBinaryLabel, "labels must be 0 or 1");
  }
  for (const auto& [name, bits] : set.features) {
    require(!name.empty(), ErrorCode::kInvalidArgument, "empty feature name");
    require(bits.size() == n, ErrorCode::kShapeMismatch, "feature '" + name + "' length");
    require(is_binary(bits), ErrorCode::kNonBinaryLabel, "feature '" + name + "' must be 0 or 1");
  }
  require(!set.group_names.empty(), ErrorCode::kShapeMismatch, "at least one group required");
  if (!set.group.empty()) {
    require(set.group.size() == n, ErrorCode::kShapeMismatch, "group vector length");
    std::vector<bool> seen(set.group_names.size(), false);
    for (auto g : set.group) {
      require(g < set.group_names.size(), ErrorCode::kShapeMismatch,
              "group id " + std::to_string(g) + " out of range");
      seen[g] = true;
    }
    require(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }),
            ErrorCode::kShapeMismatch, "group ids must be dense from 0");
  }
}

namespace detail {

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kMissingFile, path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

inline Matrix decode_f32(const std::vector<char>& bytes, std::size_t n, std::size_t d,
                         const std::string& what) {
  require(bytes.size() == n * d * 4, ErrorCode::kShapeMismatch,
          what + " holds " + std::to_string(bytes.size()) + " bytes, expected " +
              std::to_string(n * d * 4));
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 4 * (i * d + j);
      const std::uint32_t u = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                              (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
      float f;
      std::memcpy(&f, &u, 4);
      require(std::isfinite(f), ErrorCode::kNonFiniteActivation,
              what + " row " + std::to_string(i) + " col " + std::to_string(j));
      m(i, j) = static_cast<double>(f);
    }
  }
  return m;
}

inline std::vector<char> encode_f32(const Matrix& m) {
  std::vector<char> bytes(static_cast<std::size_t>(m.size()) * 4);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float f = static_cast<float>(m(i, j));
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      for (int b = 0; b < 4; ++b) bytes[k++] = static_cast<char>((u >> (8 * b)) & 0xffu);
    }
  }
  return bytes;
}

inline BinaryVector decode_u8(const std::vector<char>& bytes, std::size_t n,
                              const std::string& what) {
  require(bytes.size() == n, ErrorCode::kShapeMismatch,
          what + " holds " + std::to_string(bytes.size()) + " entries, expected " +
              std::to_string(n));
  BinaryVector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<std::uint8_t>(bytes[i]);
    require(v[i] <= 1, ErrorCode::kNonBinaryLabel,
            what + " row " + std::to_string(i) + " has value " + std::to_string(v[i]));
  }
  return v;
}

inline std::vector<char> encode_u8(const BinaryVector& v) {
  return std::vector<char>(v.begin(), v.end());
}

}  // namespace detail

inline ContrastActivationSet load_activation_set(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto manifest_bytes = detail::read_file(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadManifest, e.what());
  }

  std::size_t n = 0, d = 0;
  bool has_labels = false;
  std::vector<std::string> group_names, feature_names;
  try {
    require(manifest.at("format_version").get<int>() == 1, ErrorCode::kBadManifest,
            "unsupported format_version");
    n = manifest.at("n_pairs").get<std::size_t>();
    d = manifest.at("dim").get<std::size_t>();
    has_labels = manifest.at("has_labels").get<bool>();
    group_names = manifest.value("groups", std::vector<std::string>{"default"});
    feature_names = manifest.value("feature_names", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadManifest, e.what());
  }
  require(n >= 1 && d >= 1, ErrorCode::kShapeMismatch, "manifest declares an empty set");
  if (group_names.empty()) group_names = {"default"};

  ContrastActivationSet set;
  set.pos = detail::decode_f32(detail::read_file(dir / "pos.f32"), n, d, "pos.f32");
  set.neg = detail::decode_f32(detail::read_file(dir / "neg.f32"), n, d, "neg.f32");
  if (has_labels) set.labels = detail::decode_u8(detail::read_file(dir / "labels.u8"), n, "labels.u8");
  for (const auto& name : feature_names) {
    const std::string file = "feature_" + name + ".u8";
    set.features[name] = detail::decode_u8(detail::read_file(dir / file), n, file);
  }
  set.group_names = group_names;
  if (fs::exists(dir / "group.u16")) {
    const auto bytes = detail::read_file(dir / "group.u16");
    require(bytes.size() == 2 * n, ErrorCode::kShapeMismatch, "group.u16 length");
    set.group.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 2 * i;
      set.group[i] = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
  }
  set.normalized = false;
  validate(set);
  return set;
}

inline void save_activation_set(const ContrastActivationSet& set, const std::filesystem::path& dir) {
  validate(set);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorCode::kIo,
          "cannot create directory " + dir.string());

  nlohmann::ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["n_pairs"] = set.n_pairs();
  manifest["dim"] = set.dim();
  manifest["groups"] = set.group_names;
  manifest["has_labels"] = set.labels.has_value();
  std::vector<std::string> names;
  for (const auto& kv : set.features) names.push_back(kv.first);
  manifest["feature_names"] = names;
  const std::string text = manifest.dump(2) + "\n";
  detail::write_file(dir / "manifest.json", std::vector<char>(text.begin(), text.end()));

  detail::write_file(dir / "pos.f32", detail::encode_f32(set.pos));
  detail::write_file(dir / "neg.f32", detail::encode_f32(set.neg));
  if (set.labels) detail::write_file(dir / "labels.u8", detail::encode_u8(*set.labels));
  for (const auto& [name, bits] : set.features)
    detail::write_file(dir / ("feature_" + name + ".u8"), detail::encode_u8(bits));

  const bool all_zero = std::all_of(set.group.begin(), set.group.end(), [](auto g) { return g == 0; });
  if (!all_zero) {
    std::vector<char> bytes(2 * set.n_pairs());
    for (std::size_t i = 0; i < set.n_pairs(); ++i) {
      bytes[2 * i] = static_cast<char>(set.group[i] & 0xff);
      bytes[2 * i + 1] = static_cast<char>(set.group[i] >> 8);
    }
    detail::write_file(dir / "group.u16", bytes);
  } else {
    std::filesystem::remove(dir / "group.u16", ec);
  }
}

struct SideStats {
  Vector mean;
  Vector sigma;  // divisor actually applied; zero-variance dimensions hold 1
};

struct NormalizationStats {
  static constexpr double kSigmaFloor = 1e-6;
  std::vector<SideStats> pos;  // indexed by group id
  std::vector<SideStats> neg;
};

namespace detail {

inline SideStats side_stats(const Matrix& rows, const std::vector<std::size_t>& idx) {
  const Eigen::Index d = rows.cols();
  SideStats s{Vector::Zero(d), Vector::Zero(d)};
  for (auto i : idx) s.mean += rows.row(static_cast<Eigen::Index>(i)).transpose();
  s.mean /= static_cast<double>(idx.size());
  for (auto i : idx) s.sigma += (rows.row(static_cast<Eigen::Index>(i)).transpose() - s.mean).cwiseAbs2();
  s.sigma = (s.sigma / static_cast<double>(idx.size())).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (s.sigma(j) < NormalizationStats::kSigmaFloor) s.sigma(j) = 1.0;
  return s;
}

}  // namespace detail

// Centers and scales each (group, side) block independently with the population
// standard deviation per dimension.
inline std::pair<ContrastActivationSet, NormalizationStats> normalize(const ContrastActivationSet& set) {
  require(!set.normalized, ErrorCode::kAlreadyNormalized, "normalize called twice");
  validate(set);

  std::vector<std::vector<std::size_t>> rows_of(set.n_groups());
  for (std::size_t i = 0; i < set.n_pairs(); ++i) rows_of[set.group_of(i)].push_back(i);

  ContrastActivationSet out = set;
  NormalizationStats stats;
  for (std::size_t g = 0; g < rows_of.size(); ++g) {
    const auto& idx = rows_of[g];
    if (idx.empty()) {
      stats.pos.push_back({});
      stats.neg.push_back({});
      continue;
    }
    stats.pos.push_back(detail::side_stats(set.pos, idx));
    stats.neg.push_back(detail::side_stats(set.neg, idx));
    for (auto i : idx) {
      const auto r = static_cast<Eigen::Index>(i);
      out.pos.row(r) = (set.pos.row(r) - stats.pos[g].mean.transpose()).cwiseQuotient(stats.pos[g].sigma.transpose());
      out.neg.row(r) = (set.neg.row(r) - stats.neg[g].mean.transpose()).cwiseQuotient(stats.neg[g].sigma.transpose());
    }
  }
  out.normalized = true;
  return {std::move(out), std::move(stats)};
}

}  // namespace ccs
