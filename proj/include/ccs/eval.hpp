#pragma once

// Accuracy against ground-truth and planted features, pairwise agreement, and
// per-method seed distributions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccs/core.hpp"
#include "ccs/probes.hpp"

namespace ccs {

struct AccuracyReport {
  std::string method;
  std::uint64_t seed = 0;
  std::string target;
  double accuracy = 0.0;
  bool flipped = false;
};

struct AgreementReport {
  std::string method_a, method_b;
  double observed = 0.0;
  double expected_independent = 0.0;
  double acc_a = 0.0, acc_b = 0.0;
};

inline double accuracy_of(const BinaryVector& predicted, const BinaryVector& target) {
  require(predicted.size() == target.size() && !target.empty(), ErrorCode::kDimensionMismatch,
          "prediction and target lengths differ");
  return static_cast<double>(count_matches(predicted, target)) / static_cast<double>(target.size());
}

inline AccuracyReport accuracy_vs(const MethodOutput& output, const BinaryVector& target, const std::string& target_name,
                                  bool disambiguate) {
  require(output.size() == target.size(), ErrorCode::kDimensionMismatch,
          "output has " + std::to_string(output.size()) + " entries, target has " + std::to_string(target.size()));
  const MethodOutput oriented = disambiguate ? truth_disambiguate(output, target) : output;
  return {output.method, output.seed, target_name, accuracy_of(induced_classifier(oriented), target),
          disambiguate && oriented.flip != output.flip};
}

// Decides the flip on the masked rows only and applies it to every row.
inline MethodOutput subset_disambiguate(const MethodOutput& output, const BinaryVector& target, const BinaryVector& mask) {
  require(target.size() == output.size() && mask.size() == output.size(), ErrorCode::kDimensionMismatch,
          "target/mask length differs from output");
  const auto selected = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  require(selected >= 1, ErrorCode::kInvalidArgument, "mask selects no rows");
  const BinaryVector f = induced_classifier(output);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (mask[i] && f[i] == target[i]) ++correct;
  MethodOutput out = 2 * correct < selected ? flipped(output) : output;
  out.oriented = true;
  return out;
}

// Both inputs must already be oriented toward `target`; orientation is never
// recomputed here.
inline AgreementReport agreement(const MethodOutput& a, const MethodOutput& b, const BinaryVector& target) {
  require(a.oriented && b.oriented, ErrorCode::kOrientation, "agreement needs oriented outputs");
  require(a.size() == b.size() && a.size() == target.size(), ErrorCode::kDimensionMismatch,
          "agreement inputs differ in length");
  const BinaryVector fa = induced_classifier(a), fb = induced_classifier(b);
  AgreementReport r;
  r.method_a = a.method;
  r.method_b = b.method;
  r.observed = accuracy_of(fa, fb);
  r.acc_a = accuracy_of(fa, target);
  r.acc_b = accuracy_of(fb, target);
  r.expected_independent = r.acc_a * r.acc_b + (1.0 - r.acc_a) * (1.0 - r.acc_b);
  return r;
}

struct SeedSummary {
  static constexpr double kBinWidth = 0.05;
  static constexpr std::size_t kBins = 20;

  std::string method, target;
  std::size_t count = 0;
  double min = 0.0, max = 0.0, mean = 0.0, median = 0.0;
  std::array<std::size_t, kBins> histogram{};  // bin b covers [0.05 b, 0.05 (b + 1)), last bin closed
  bool bimodal = false;

  static std::size_t bin_of(double v) {
    const auto b = static_cast<long>(std::floor(v / kBinWidth + 1e-9));
    return static_cast<std::size_t>(std::clamp<long>(b, 0, kBins - 1));
  }
};

// Bimodal iff both the [0, 0.6) bins and the [0.9, 1] bins are occupied.
inline SeedSummary seed_summary(const std::vector<AccuracyReport>& reports) {
  require(!reports.empty(), ErrorCode::kInvalidArgument, "seed_summary needs at least one report");
  SeedSummary s;
  s.method = reports.front().method;
  s.target = reports.front().target;
  std::vector<double> acc;
  for (const auto& r : reports) {
    require(r.method == s.method && r.target == s.target, ErrorCode::kInvalidArgument,
            "seed_summary mixes methods or targets");
    acc.push_back(r.accuracy);
  }
  s.count = acc.size();
  std::sort(acc.begin(), acc.end());
  s.min = acc.front();
  s.max = acc.back();
  double sum = 0.0;
  for (double a : acc) sum += a;
  s.mean = sum / static_cast<double>(acc.size());
  const std::size_t mid = acc.size() / 2;
  s.median = acc.size() % 2 ? acc[mid] : 0.5 * (acc[mid - 1] + acc[mid]);
  for (double a : acc) ++s.histogram[SeedSummary::bin_of(a)];
  bool low = false, high = false;
  for (std::size_t b = 0; b < 12; ++b) low = low || s.histogram[b] > 0;
  for (std::size_t b = 18; b < SeedSummary::kBins; ++b) high = high || s.histogram[b] > 0;
  s.bimodal = low && high;
  return s;
}

inline nlohmann::ordered_json to_json(const SeedSummary& s) {
  nlohmann::ordered_json j;
  j["method"] = s.method;
  j["target"] = s.target;
  j["count"] = s.count;
  j["min"] = s.min;
  j["max"] = s.max;
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["histogram"] = s.histogram;
  j["bimodal"] = s.bimodal;
  return j;
}

inline nlohmann::ordered_json to_json(const AgreementReport& r) {
  nlohmann::ordered_json j;
  j["method_a"] = r.method_a;
  j["method_b"] = r.method_b;
  j["observed"] = r.observed;
  j["expected_independent"] = r.expected_independent;
  j["acc_a"] = r.acc_a;
  j["acc_b"] = r.acc_b;
  return j;
}

// ---------------------------------------------------------------------------
// CSV: method,seed,target,accuracy,flipped

inline constexpr const char* kReportCsvHeader = "method,seed,target,accuracy,flipped";

inline std::string to_csv_row(const AccuracyReport& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", r.accuracy);
  return r.method + "," + std::to_string(r.seed) + "," + r.target + "," + buf + "," + (r.flipped ? "1" : "0");
}

inline AccuracyReport parse_csv_row(const std::string& line) {
  std::vector<std::string> cols;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cols.push_back(cell);
  require(cols.size() == 5, ErrorCode::kInvalidArgument, "report row needs 5 columns: '" + line + "'");
  AccuracyReport r;
  r.method = cols[0];
  r.target = cols[2];
  try {
    std::size_t used = 0;
    r.seed = std::stoull(cols[1], &used);
    require(used == cols[1].size(), ErrorCode::kInvalidArgument, "seed column");
    r.accuracy = std::stod(cols[3], &used);
    require(used == cols[3].size(), ErrorCode::kInvalidArgument, "accuracy column");
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidArgument, "unparseable report row: '" + line + "'");
  }
  require(cols[4] == "0" || cols[4] == "1", ErrorCode::kInvalidArgument, "flipped column");
  r.flipped = cols[4] == "1";
  return r;
}

}  // namespace ccs
