#pragma once

// Experiment runner: builds or loads a dataset, normalizes it once, runs every
// method x seed, evaluates each target and writes CSV / JSON artifacts.
//
// Spec file (JSON, unknown keys rejected):
//   {
//     "format_version": 1,
//     "input": {"synthetic": {...}} | {"path": "<activation-set dir>"},
//     "methods": [{"name": "ccs", "learning_rate": 0.001, "epochs": 1000,
//                  "weight_decay": 0, "loss_variant": "symmetric"}, {"name": "pca"}, ...],
//     "seeds": 50, "seed_base": 0,
//     "targets": ["truth", "<feature>", ...],
//     "outputs": "<dir>"
//   }

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccs/activation_store.hpp"
#include "ccs/baselines.hpp"
#include "ccs/eval.hpp"
#include "ccs/probes.hpp"
#include "ccs/rng.hpp"
#include "ccs/synthgen.hpp"

namespace ccs {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"ccs", "pca", "kmeans", "logreg", "random"};
  return names;
}

struct MethodSpec {
  std::string name;
  TrainConfig train;  // only consulted by ccs
};

struct ExperimentSpec {
  std::variant<SyntheticConfig, std::filesystem::path> input;
  std::vector<MethodSpec> methods;
  std::size_t seeds = 50;
  std::uint64_t seed_base = 0;
  std::vector<std::string> targets;
  std::filesystem::path outputs;
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  require(obj.is_object(), ErrorCode::kInvalidSpec, where + " must be an object");
  for (const auto& [key, value] : obj.items())
    require(allowed.count(key) > 0, ErrorCode::kInvalidSpec, "unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

}  // namespace detail

inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"n_pairs", "dim", "noise_std", "knowledge_salience", "features", "seed", "balance"},
                     "synthetic");
  SyntheticConfig c;
  c.n_pairs = detail::get_or<std::size_t>(j, "n_pairs", c.n_pairs);
  c.dim = detail::get_or<std::size_t>(j, "dim", c.dim);
  c.noise_std = detail::get_or<double>(j, "noise_std", c.noise_std);
  c.knowledge_salience = detail::get_or<double>(j, "knowledge_salience", c.knowledge_salience);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  c.balance = detail::get_or<bool>(j, "balance", c.balance);
  if (j.contains("features")) {
    require(j.at("features").is_array(), ErrorCode::kInvalidSpec, "features must be an array");
    for (const auto& fj : j.at("features")) {
      detail::check_keys(fj, {"name", "salience", "parity", "prob", "direction_seed"}, "feature");
      PlantedFeature f;
      f.name = fj.at("name").get<std::string>();
      f.salience = detail::get_or<double>(fj, "salience", f.salience);
      f.parity = parse_parity(detail::get_or<std::string>(fj, "parity", "statement_level"));
      f.prob = detail::get_or<double>(fj, "prob", f.prob);
      f.direction_seed = detail::get_or<std::uint64_t>(fj, "direction_seed", c.features.size() + 1);
      c.features.push_back(f);
    }
  }
  validate(c);
  return c;
}

inline nlohmann::ordered_json to_json(const SyntheticConfig& c) {
  nlohmann::ordered_json j;
  j["n_pairs"] = c.n_pairs;
  j["dim"] = c.dim;
  j["noise_std"] = c.noise_std;
  j["knowledge_salience"] = c.knowledge_salience;
  j["seed"] = c.seed;
  j["balance"] = c.balance;
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : c.features) {
    nlohmann::ordered_json fj;
    fj["name"] = f.name;
    fj["salience"] = f.salience;
    fj["parity"] = to_string(f.parity);
    fj["prob"] = f.prob;
    fj["direction_seed"] = f.direction_seed;
    j["features"].push_back(fj);
  }
  return j;
}

// Relative input paths resolve against base_dir.
inline ExperimentSpec parse_experiment_spec(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentSpec spec;
  try {
    detail::check_keys(j, {"format_version", "input", "methods", "seeds", "seed_base", "targets", "outputs"},
                       "spec");
    require(j.contains("format_version") && j.at("format_version").get<int>() == 1, ErrorCode::kInvalidSpec,
            "format_version must be 1");
    const auto& input = j.at("input");
    detail::check_keys(input, {"synthetic", "path"}, "input");
    require(input.size() == 1, ErrorCode::kInvalidSpec, "input needs exactly one of synthetic/path");
    if (input.contains("synthetic")) {
      spec.input = synthetic_config_from_json(input.at("synthetic"));
    } else {
      std::filesystem::path p = input.at("path").get<std::string>();
      spec.input = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }

    require(j.at("methods").is_array(), ErrorCode::kInvalidSpec, "methods must be an array");
    std::set<std::string> seen;
    for (const auto& mj : j.at("methods")) {
      MethodSpec m;
      if (mj.is_string()) {
        m.name = mj.get<std::string>();
      } else {
        detail::check_keys(mj, {"name", "learning_rate", "epochs", "weight_decay", "loss_variant"}, "method");
        m.name = mj.at("name").get<std::string>();
        require(m.name == "ccs" || mj.size() == 1, ErrorCode::kInvalidSpec,
                "training overrides only apply to ccs, not '" + m.name + "'");
        m.train.learning_rate = detail::get_or<double>(mj, "learning_rate", m.train.learning_rate);
        m.train.epochs = detail::get_or<std::size_t>(mj, "epochs", m.train.epochs);
        m.train.weight_decay = detail::get_or<double>(mj, "weight_decay", m.train.weight_decay);
        m.train.loss_variant = parse_loss_variant(detail::get_or<std::string>(mj, "loss_variant", "symmetric"));
      }
      const auto& known = known_methods();
      require(std::find(known.begin(), known.end(), m.name) != known.end(), ErrorCode::kInvalidSpec,
              "unknown method '" + m.name + "'");
      require(seen.insert(m.name).second, ErrorCode::kInvalidSpec, "method '" + m.name + "' listed twice");
      require(m.train.epochs >= 1 && m.train.learning_rate > 0.0, ErrorCode::kInvalidSpec,
              "ccs needs epochs >= 1 and learning_rate > 0");
      spec.methods.push_back(m);
    }
    require(!spec.methods.empty(), ErrorCode::kInvalidSpec, "at least one method required");

    spec.seeds = detail::get_or<std::size_t>(j, "seeds", spec.seeds);
    require(spec.seeds >= 1, ErrorCode::kInvalidSpec, "seeds must be >= 1");
    spec.seed_base = detail::get_or<std::uint64_t>(j, "seed_base", 0);
    spec.targets = j.at("targets").get<std::vector<std::string>>();
    require(!spec.targets.empty(), ErrorCode::kInvalidSpec, "at least one target required");
    spec.outputs = detail::get_or<std::string>(j, "outputs", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidSpec) throw;
    throw Error(ErrorCode::kInvalidSpec, e.what());
  }
  return spec;
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& file) {
  std::ifstream in(file);
  require(static_cast<bool>(in), ErrorCode::kMissingFile, file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, e.what());
  }
  return parse_experiment_spec(j, file.parent_path());
}

// Raw (unnormalized) dataset named by the spec input.
inline ContrastActivationSet materialize_input(const ExperimentSpec& spec) {
  if (const auto* cfg = std::get_if<SyntheticConfig>(&spec.input)) return generate(*cfg);
  return load_activation_set(std::get<std::filesystem::path>(spec.input));
}

inline BinaryVector target_bits(const ContrastActivationSet& set, const std::string& target) {
  if (target == kTruthTarget) {
    require(set.labels.has_value(), ErrorCode::kUnknownFeature, "dataset has no labels for target 'truth'");
    return *set.labels;
  }
  const auto it = set.features.find(target);
  require(it != set.features.end(), ErrorCode::kUnknownFeature, "dataset has no feature '" + target + "'");
  return it->second;
}

struct RunOptions {
  std::size_t threads = 1;
  bool write_outputs = true;
};

struct AgreementSummary {
  std::string method_a, method_b, target;
  std::vector<AgreementReport> per_seed;
  double observed_mean = 0.0;
  double expected_mean = 0.0;
  double fraction_at_least_expected = 0.0;
};

struct ExperimentResult {
  std::size_t n_pairs = 0, dim = 0, seeds = 0;
  std::vector<MethodOutput> outputs;   // canonical (method, seed) order, unoriented
  std::vector<AccuracyReport> reports; // canonical (method, seed, target) order
  std::vector<SeedSummary> summaries;  // (method, target)
  std::vector<AgreementSummary> agreements;
  std::optional<PcaModel> pca;         // first pca seed, for coordinate export

  const MethodOutput& output(const std::string& method, std::size_t seed) const {
    for (const auto& o : outputs)
      if (o.method == method && o.seed == seed) return o;
    throw Error(ErrorCode::kInvalidArgument, "no output for " + method + " seed " + std::to_string(seed));
  }

  const AccuracyReport& report(const std::string& method, std::size_t seed, const std::string& target) const {
    for (const auto& r : reports)
      if (r.method == method && r.seed == seed && r.target == target) return r;
    throw Error(ErrorCode::kInvalidArgument, "no report for " + method + "/" + target);
  }

  const SeedSummary& summary(const std::string& method, const std::string& target) const {
    for (const auto& s : summaries)
      if (s.method == method && s.target == target) return s;
    throw Error(ErrorCode::kInvalidArgument, "no summary for " + method + "/" + target);
  }

  const AgreementSummary& agreement_for(const std::string& a, const std::string& b, const std::string& target) const {
    for (const auto& s : agreements)
      if (s.target == target && ((s.method_a == a && s.method_b == b) || (s.method_a == b && s.method_b == a)))
        return s;
    throw Error(ErrorCode::kInvalidArgument, "no agreement for " + a + "/" + b + "/" + target);
  }

  nlohmann::ordered_json summary_json() const {
    nlohmann::ordered_json j;
    j["n_pairs"] = n_pairs;
    j["dim"] = dim;
    j["seeds"] = seeds;
    j["summaries"] = nlohmann::ordered_json::array();
    for (const auto& s : summaries) j["summaries"].push_back(to_json(s));
    j["agreements"] = nlohmann::ordered_json::array();
    for (const auto& a : agreements) {
      nlohmann::ordered_json aj;
      aj["method_a"] = a.method_a;
      aj["method_b"] = a.method_b;
      aj["target"] = a.target;
      aj["observed_mean"] = a.observed_mean;
      aj["expected_independent_mean"] = a.expected_mean;
      aj["fraction_observed_at_least_expected"] = a.fraction_at_least_expected;
      aj["per_seed"] = nlohmann::ordered_json::array();
      for (const auto& r : a.per_seed) aj["per_seed"].push_back(to_json(r));
      j["agreements"].push_back(aj);
    }
    return j;
  }
};

// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
// exception in index order is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, count));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {}) {
  require(spec.seeds >= 1 && !spec.methods.empty() && !spec.targets.empty(), ErrorCode::kInvalidSpec,
          "spec needs seeds >= 1, a method and a target");
  const ContrastActivationSet raw = materialize_input(spec);
  const ContrastActivationSet set = normalize(raw).first;

  std::vector<BinaryVector> targets;
  for (const auto& t : spec.targets) targets.push_back(target_bits(set, t));

  const bool need_diffs = std::any_of(spec.methods.begin(), spec.methods.end(),
                                      [](const MethodSpec& m) { return m.name == "pca" || m.name == "kmeans"; });
  const Matrix diffs = need_diffs ? diff_features(set) : Matrix();

  std::optional<MethodOutput> logreg;
  for (const auto& m : spec.methods)
    if (m.name == "logreg") {
      require(set.labels.has_value(), ErrorCode::kUnknownFeature, "logreg needs labels");
      logreg = logreg_fit(concat_features(set), *set.labels);
    }

  ExperimentResult result;
  result.n_pairs = set.n_pairs();
  result.dim = set.dim();
  result.seeds = spec.seeds;
  const std::size_t n_tasks = spec.methods.size() * spec.seeds;
  result.outputs.resize(n_tasks);
  std::vector<std::optional<PcaModel>> pca_models(n_tasks);

  parallel_for(n_tasks, options.threads, [&](std::size_t task) {
    const MethodSpec& method = spec.methods[task / spec.seeds];
    const std::size_t index = task % spec.seeds;
    const std::uint64_t seed = derive_seed(spec.seed_base, method.name, index);
    MethodOutput out;
    if (method.name == "ccs") {
      TrainConfig cfg = method.train;
      cfg.seed = seed;
      out = average_prediction(train_ccs(set, cfg).first, set, "ccs", seed);
    } else if (method.name == "pca") {
      auto [model, o] = crc_tpc_fit(diffs, seed);
      pca_models[task] = std::move(model);
      out = std::move(o);
    } else if (method.name == "kmeans") {
      out = kmeans_fit(diffs, seed).second;
    } else if (method.name == "logreg") {
      out = *logreg;
    } else {
      out = random_probe_baseline(set, seed);
    }
    out.method = method.name;
    out.seed = index;
    result.outputs[task] = std::move(out);
  });
  for (auto& m : pca_models)
    if (m) {
      result.pca = std::move(m);
      break;
    }

  for (const auto& out : result.outputs)
    for (std::size_t t = 0; t < targets.size(); ++t)
      result.reports.push_back(accuracy_vs(out, targets[t], spec.targets[t], true));

  for (const auto& m : spec.methods)
    for (const auto& t : spec.targets) {
      std::vector<AccuracyReport> group;
      for (const auto& r : result.reports)
        if (r.method == m.name && r.target == t) group.push_back(r);
      result.summaries.push_back(seed_summary(group));
    }

  for (std::size_t a = 0; a < spec.methods.size(); ++a)
    for (std::size_t b = a + 1; b < spec.methods.size(); ++b)
      for (std::size_t t = 0; t < targets.size(); ++t) {
        AgreementSummary s{spec.methods[a].name, spec.methods[b].name, spec.targets[t], {}, 0.0, 0.0, 0.0};
        std::size_t at_least = 0;
        for (std::size_t i = 0; i < spec.seeds; ++i) {
          const auto oa = truth_disambiguate(result.outputs[a * spec.seeds + i], targets[t]);
          const auto ob = truth_disambiguate(result.outputs[b * spec.seeds + i], targets[t]);
          s.per_seed.push_back(agreement(oa, ob, targets[t]));
          s.observed_mean += s.per_seed.back().observed;
          s.expected_mean += s.per_seed.back().expected_independent;
          if (s.per_seed.back().observed >= s.per_seed.back().expected_independent) ++at_least;
        }
        const double k = static_cast<double>(spec.seeds);
        s.observed_mean /= k;
        s.expected_mean /= k;
        s.fraction_at_least_expected = static_cast<double>(at_least) / k;
        result.agreements.push_back(std::move(s));
      }

  if (options.write_outputs && !spec.outputs.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec.outputs, ec);
    require(!ec, ErrorCode::kIo, "cannot create " + spec.outputs.string());
    std::string csv = std::string(kReportCsvHeader) + "\n";
    for (const auto& r : result.reports) csv += to_csv_row(r) + "\n";
    detail::write_text(spec.outputs / "reports.csv", csv);
    std::string jsonl;
    for (const auto& o : result.outputs) jsonl += to_json(o).dump() + "\n";
    detail::write_text(spec.outputs / "predictions.jsonl", jsonl);
    detail::write_text(spec.outputs / "summary.json", result.summary_json().dump(2) + "\n");
    if (result.pca) write_pca_coordinates_csv(*result.pca, diffs, (spec.outputs / "pca_coords.csv").string());
  }
  return result;
}

// Fits CRC-TPC once (seed derived from seed_base) and writes the n x 3
// projection coordinates plus the model.
inline PcaModel export_pca(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  const ContrastActivationSet set = normalize(materialize_input(spec)).first;
  const Matrix diffs = diff_features(set);
  PcaModel model = crc_tpc_fit(diffs, derive_seed(spec.seed_base, "pca", 0)).first;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + out_dir.string());
  write_pca_coordinates_csv(model, diffs, (out_dir / "pca_coords.csv").string());
  nlohmann::ordered_json j;
  j["explained"] = std::vector<double>(model.explained.data(), model.explained.data() + model.explained.size());
  j["center"] = std::vector<double>(model.center.data(), model.center.data() + model.center.size());
  j["components"] = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < model.components.cols(); ++c) {
    const Vector col = model.components.col(c);
    j["components"].push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  detail::write_text(out_dir / "pca_model.json", j.dump(2) + "\n");
  return model;
}

}  // namespace ccs
