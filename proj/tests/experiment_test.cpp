#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ccs/experiment.hpp"
#include "test_util.hpp"

namespace ccs {
namespace {

nlohmann::json small_spec(const std::filesystem::path& out) {
  auto j = nlohmann::json::parse(R"({
    "format_version": 1,
    "input": {"synthetic": {"n_pairs": 120, "dim": 12, "noise_std": 0.3, "knowledge_salience": 1.0, "seed": 3,
                            "features": [{"name": "distractor", "salience": 2.0, "parity": "statement_level"}]}},
    "methods": [{"name": "ccs", "epochs": 50, "learning_rate": 0.01}, "pca", "kmeans", "logreg", "random"],
    "seeds": 2,
    "targets": ["truth", "distractor"]
  })");
  j["outputs"] = out.string();
  return j;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ExperimentSpec, RejectsUnknownKeysAndBadValues) {
  const auto good = small_spec("out");
  EXPECT_NO_THROW(parse_experiment_spec(good));
  auto expect_invalid = [](nlohmann::json j) {
    try {
      parse_experiment_spec(j);
      ADD_FAILURE() << j.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidSpec);
    }
  };
  auto j = good;
  j["seedz"] = 3;
  expect_invalid(j);
  j = good;
  j["input"]["synthetic"]["noise"] = 1;
  expect_invalid(j);
  j = good;
  j["seeds"] = 0;
  expect_invalid(j);
  j = good;
  j["methods"] = nlohmann::json::array();
  expect_invalid(j);
  j = good;
  j["methods"] = {"svm"};
  expect_invalid(j);
  j = good;
  j["methods"] = {{{"name", "pca"}, {"epochs", 3}}};
  expect_invalid(j);
  j = good;
  j["methods"] = {{{"name", "ccs"}, {"epochs", 0}}};
  expect_invalid(j);
  j = good;
  j["targets"] = nlohmann::json::array();
  expect_invalid(j);
  j = good;
  j["format_version"] = 2;
  expect_invalid(j);
}

TEST(RunExperiment, CardinalityAndDeterminism) {
  const auto dir_a = testing::temp_dir("run_a"), dir_b = testing::temp_dir("run_b");
  auto spec_a = parse_experiment_spec(small_spec(dir_a));
  auto spec_b = parse_experiment_spec(small_spec(dir_b));
  const auto result = run_experiment(spec_a, {1, true});
  run_experiment(spec_b, {3, true});  // thread count must not change the bytes

  EXPECT_EQ(result.outputs.size(), 5u * 2u);
  EXPECT_EQ(result.reports.size(), 5u * 2u * 2u);
  std::size_t ccs_truth = 0;
  for (const auto& r : result.reports) ccs_truth += r.method == "ccs" && r.target == "truth";
  EXPECT_EQ(ccs_truth, 2u);

  for (const char* file : {"reports.csv", "predictions.jsonl", "summary.json", "pca_coords.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir_a / file)) << file;
    EXPECT_EQ(slurp(dir_a / file), slurp(dir_b / file)) << file;
  }

  std::ifstream csv(dir_a / "reports.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kReportCsvHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    const auto r = parse_csv_row(line);
    EXPECT_EQ(r.accuracy, result.reports[rows].accuracy);
    ++rows;
  }
  EXPECT_EQ(rows, result.reports.size());

  std::ifstream jsonl(dir_a / "predictions.jsonl");
  std::size_t n_out = 0;
  while (std::getline(jsonl, line)) {
    const auto out = method_output_from_json(nlohmann::json::parse(line));
    EXPECT_EQ(out.scores.size(), 120u);
    ++n_out;
  }
  EXPECT_EQ(n_out, result.outputs.size());
}

TEST(RunExperiment, AddingAMethodDoesNotPerturbOthers) {
  auto base = small_spec("");
  base["methods"] = {"kmeans"};
  auto more = base;
  more["methods"] = {"random", "kmeans"};
  const auto a = run_experiment(parse_experiment_spec(base), {1, false});
  const auto b = run_experiment(parse_experiment_spec(more), {1, false});
  EXPECT_EQ(a.output("kmeans", 1).scores, b.output("kmeans", 1).scores);
}

TEST(RunExperiment, LoadsActivationSetFromPath) {
  SyntheticConfig c;
  c.n_pairs = 60;
  c.dim = 8;
  c.features = {{"banana", 1.0, Parity::kQuestionLevel, 0.5, 2}};
  const auto data = testing::temp_dir("run_path_data");
  save_activation_set(generate(c), data);
  nlohmann::json j = {{"format_version", 1}, {"input", {{"path", data.string()}}},
                      {"methods", {"pca"}}, {"seeds", 1}, {"targets", {"truth", "banana"}}};
  const auto result = run_experiment(parse_experiment_spec(j), {1, false});
  EXPECT_EQ(result.n_pairs, 60u);
  j["targets"] = {"missing"};
  EXPECT_THROW(run_experiment(parse_experiment_spec(j), {1, false}), Error);
}

TEST(ParallelFor, RethrowsFirstErrorInIndexOrder) {
  try {
    parallel_for(10, 4, [](std::size_t i) {
      if (i == 3 || i == 7) throw Error(ErrorCode::kIo, std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
}

// The CLI binary: generate, run, export-pca and verify-theorems end to end.
class Cli : public ::testing::Test {
 protected:
  static int run(const std::string& args) { return std::system((std::string(CCS_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str()); }
};

TEST_F(Cli, Subcommands) {
  const auto dir = testing::temp_dir("cli");
  const auto spec_path = dir / "spec.json";
  std::ofstream(spec_path) << small_spec(dir / "run").dump(2);

  EXPECT_EQ(run("generate --spec " + spec_path.string() + " --out " + (dir / "data").string()), 0);
  EXPECT_EQ(load_activation_set(dir / "data").n_pairs(), 120u);

  EXPECT_EQ(run("run --spec " + spec_path.string() + " --seeds 1 --threads 2"), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "reports.csv"));

  EXPECT_EQ(run("export-pca --spec " + spec_path.string() + " --out " + (dir / "pca").string()), 0);
  std::ifstream coords(dir / "pca" / "pca_coords.csv");
  std::string header;
  std::getline(coords, header);
  EXPECT_EQ(header, "index,pc1,pc2,pc3");

  EXPECT_EQ(run("verify-theorems --trials 1000 --out " + (dir / "theorems.json").string()), 0);
  const auto report = nlohmann::json::parse(slurp(dir / "theorems.json"));
  EXPECT_TRUE(report["passed"].get<bool>());
  EXPECT_NE(run("verify-theorems --trials 0"), 0);

  std::ofstream(dir / "bad.json") << R"({"format_version": 1, "typo": true})";
  EXPECT_NE(run("run --spec " + (dir / "bad.json").string()), 0);
  EXPECT_NE(run("bogus"), 0);
}

}  // namespace
}  // namespace ccs
