// ccs-toolkit: command-line runner for contrast-pair probing experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ccs/ccs.hpp"

namespace {

int run_generate(const std::string& spec_file, const std::string& out_dir) {
  const auto spec = ccs::load_experiment_spec(spec_file);
  const auto* cfg = std::get_if<ccs::SyntheticConfig>(&spec.input);
  ccs::require(cfg != nullptr, ccs::ErrorCode::kInvalidSpec, "generate needs a synthetic input");
  const auto set = ccs::generate(*cfg);
  ccs::save_activation_set(set, out_dir);
  std::cout << "wrote " << set.n_pairs() << " pairs x " << set.dim() << " dims to " << out_dir << "\n";
  return 0;
}

int run_run(const std::string& spec_file, const std::string& out_dir, std::size_t seeds, std::size_t threads) {
  auto spec = ccs::load_experiment_spec(spec_file);
  if (!out_dir.empty()) spec.outputs = out_dir;
  if (seeds > 0) spec.seeds = seeds;
  ccs::require(!spec.outputs.empty(), ccs::ErrorCode::kInvalidSpec, "no output directory (set outputs or --out)");
  const auto result = ccs::run_experiment(spec, {threads, true});
  for (const auto& s : result.summaries) {
    std::printf("%-8s %-16s mean=%.4f median=%.4f min=%.4f max=%.4f bimodal=%s\n", s.method.c_str(),
                s.target.c_str(), s.mean, s.median, s.min, s.max, s.bimodal ? "yes" : "no");
  }
  std::cout << "artifacts in " << spec.outputs.string() << "\n";
  return 0;
}

int run_verify(std::size_t trials, std::uint64_t seed, const std::string& out_file) {
  const auto report = ccs::verify_theorems(trials, seed);
  const std::string text = report.to_json().dump(2);
  if (!out_file.empty()) {
    std::ofstream out(out_file, std::ios::trunc);
    ccs::require(static_cast<bool>(out), ccs::ErrorCode::kIo, "cannot write " + out_file);
    out << text << "\n";
  }
  std::cout << text << "\n";
  return report.passed() ? 0 : 1;
}

int run_export_pca(const std::string& spec_file, const std::string& out_dir) {
  const auto spec = ccs::load_experiment_spec(spec_file);
  const std::filesystem::path dir = out_dir.empty() ? spec.outputs : std::filesystem::path(out_dir);
  ccs::require(!dir.empty(), ccs::ErrorCode::kInvalidSpec, "no output directory (set outputs or --out)");
  const auto model = ccs::export_pca(spec, dir);
  std::cout << "explained variance:";
  for (Eigen::Index i = 0; i < model.explained.size(); ++i) std::cout << " " << model.explained(i);
  std::cout << "\nwrote " << (dir / "pca_coords.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrast-consistent search and baseline probes on contrastive activations"};
  app.require_subcommand(1);

  std::string spec_file, out_dir;
  std::size_t seeds = 0, threads = 1, trials = 1000;
  std::uint64_t seed = 0;

  auto* generate = app.add_subcommand("generate", "Write the synthetic dataset described by a spec");
  generate->add_option("--spec", spec_file, "Experiment spec (JSON)")->required();
  generate->add_option("--out", out_dir, "Output activation-set directory")->required();

  auto* run = app.add_subcommand("run", "Run every method x seed and write reports");
  run->add_option("--spec", spec_file, "Experiment spec (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides spec outputs)");
  run->add_option("--seeds", seeds, "Seeds per method (overrides spec)")->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify-theorems", "Randomized checks of the CCS identifiability results");
  verify->add_option("--trials", trials, "Random trials per check");
  verify->add_option("--seed", seed, "Harness seed");
  verify->add_option("--out", out_dir, "Also write the JSON report to this file");

  auto* pca = app.add_subcommand("export-pca", "Write CRC-TPC projection coordinates (n x 3 CSV)");
  pca->add_option("--spec", spec_file, "Experiment spec (JSON)")->required();
  pca->add_option("--out", out_dir, "Output directory (overrides spec outputs)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return run_generate(spec_file, out_dir);
    if (*run) return run_run(spec_file, out_dir, seeds, threads);
    if (*verify) return run_verify(trials, seed, out_dir);
    if (*pca) return run_export_pca(spec_file, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
