#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ccs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One entry per question, values restricted to {0, 1}.
using BinaryVector = std::vector<std::uint8_t>;

enum class ErrorCode {
  kMissingFile,
  kShapeMismatch,
  kNonBinaryLabel,
  kNonFiniteActivation,
  kBadManifest,
  kIo,
  kInvalidArgument,
  kDimensionMismatch,
  kAlreadyNormalized,
  kNotNormalized,
  kNonFiniteLoss,
  kRankDeficient,
  kUnknownFeature,
  kOrientation,
  kInvalidSpec,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kNonBinaryLabel: return "non-binary label";
    case ErrorCode::kNonFiniteActivation: return "non-finite activation";
    case ErrorCode::kBadManifest: return "bad manifest";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kAlreadyNormalized: return "already normalized";
    case ErrorCode::kNotNormalized: return "not normalized";
    case ErrorCode::kNonFiniteLoss: return "non-finite loss";
    case ErrorCode::kRankDeficient: return "rank deficient";
    case ErrorCode::kUnknownFeature: return "unknown feature";
    case ErrorCode::kOrientation: return "orientation mismatch";
    case ErrorCode::kInvalidSpec: return "invalid spec";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& detail) {
  if (!cond) throw Error(code, detail);
}

inline bool is_binary(const BinaryVector& v) {
  for (auto b : v)
    if (b > 1) return false;
  return true;
}

inline BinaryVector complement(const BinaryVector& v) {
  BinaryVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<std::uint8_t>(1 - v[i]);
  return out;
}

}  // namespace ccs
