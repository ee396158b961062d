#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "boaw/manifest.hpp"
#include "test_util.hpp"

namespace boaw::stages {
namespace {

/// Runs the CLI binary and returns its exit status.
int cli(const std::string& args, const test::TempDir& dir) {
  const std::string cmd = std::string(BOAW_CLI_PATH) + " --out-dir '" + dir.path().string() + "' " + args +
                          " > '" + (dir / "stdout.txt").string() + "' 2> '" + (dir / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json pipeline_manifest(const std::string& cohort = "cohort.csv") {
  return Json::parse(R"({
    "seed": 3,
    "stages": [
      {"command": "synth", "options": {"output": ")" + cohort + R"(", "subjects_per_class": 4, "features": 6,
                                       "informative": 2, "min_segments": 4, "max_segments": 6}},
      {"command": "select", "options": {"input": ")" + cohort + R"(", "output": "sel.json", "k": 3,
                                        "repetitions": 10, "trees": 10, "train_out": "sel.csv"}},
      {"command": "codebook", "options": {"input": "sel.csv", "output": "book.json", "k_per_class": 2, "restarts": 2}},
      {"command": "histograms", "options": {"codebook": "book.json", "input": "sel.csv", "output": "h.csv"}},
      {"command": "train", "options": {"kind": "chi2_svm", "input": "h.csv", "output": "model.json"}},
      {"command": "predict", "options": {"model": "model.json", "input": "h.csv", "output": "pred.csv"}},
      {"command": "loso", "options": {"input": ")" + cohort + R"(", "output": "loso.json", "k_sweep": "2",
                                      "repetitions": 2, "restarts": 2, "classifiers": "chi2_svm,knn5"}}
    ]
  })");
}

TEST(Manifest, MissingInputNamesPathAndRunsNothing) {
  test::TempDir dir;
  Json m = pipeline_manifest();
  m["stages"][3]["options"]["input"] = "nowhere.csv";
  StageContext ctx;
  ctx.out_dir = dir.path();
  try {
    run_manifest(manifest_from_json(m), ctx);
    FAIL() << "expected a validation failure";
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.index(), 3u);
    EXPECT_EQ(e.code(), ExitCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("nowhere.csv"), std::string::npos);
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "cohort.csv"));
}

TEST(Manifest, SelectionLargerThanTableIsRejectedUpFront) {
  test::TempDir dir;
  Json m = pipeline_manifest();
  m["stages"][1]["options"]["k"] = 7;
  StageContext ctx;
  ctx.out_dir = dir.path();
  EXPECT_THROW(validate_manifest(manifest_from_json(m), ctx), StageFailure);
  m["stages"][1]["options"]["k"] = 3;
  m["stages"][1]["options"]["bogus"] = 1;
  EXPECT_THROW(validate_manifest(manifest_from_json(m), ctx), StageFailure);
}

TEST(Manifest, FullPipelineRunsAndArtifactsLoad) {
  test::TempDir dir;
  StageContext ctx;
  ctx.out_dir = dir.path();
  ctx.seed = 3;
  const auto result = run_manifest(manifest_from_json(pipeline_manifest()), ctx);
  ASSERT_EQ(result.summaries.size(), 7u);
  EXPECT_EQ(result.summaries[2].at("shape"), Json::parse("[4, 3]"));
  EXPECT_NO_THROW(read_artifact(dir / "model.json", ArtifactKind::kModel));
  EXPECT_THROW(read_artifact(dir / "model.json", ArtifactKind::kCodebook), SchemaError);
  const auto report = read_artifact(dir / "loso.json", ArtifactKind::kReport);
  EXPECT_EQ(report.rng_seed, 3u);
  EXPECT_NE(test::slurp(dir / "pred.csv").find("subject_id,predicted,label"), std::string::npos);
}

TEST(Manifest, TomlMatchesJson) {
  test::TempDir dir;
  test::spit(dir / "m.toml", R"(seed = 2
[[stages]]
command = "synth"
[stages.options]
output = "c.csv"
subjects_per_class = 3
features = 4
informative = 1
)");
  const auto m = read_manifest(dir / "m.toml");
  ASSERT_EQ(m.stages.size(), 1u);
  EXPECT_EQ(*m.seed, 2u);
  EXPECT_EQ(m.stages[0].options.at("subjects_per_class"), 3);
  test::spit(dir / "m.yaml", "seed: 1");
  EXPECT_THROW(read_manifest(dir / "m.yaml"), ValidationError);
  test::spit(dir / "bad.json", R"({"stages": []})");
  EXPECT_THROW(read_manifest(dir / "bad.json"), ValidationError);
}

TEST(Cli, ExitCodes) {
  test::TempDir dir;
  EXPECT_EQ(cli("synth --output c.csv --subjects-per-class 3 --features 4 --informative 1", dir), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "c.csv"));
  EXPECT_EQ(cli("synth --output c.csv --no-such-flag 1", dir), 2);
  EXPECT_EQ(cli("codebook --input c.csv --output b.json --k-per-class 0", dir), 2);
  EXPECT_EQ(cli("codebook --input missing.csv --output b.json", dir), 3);
  test::spit(dir / "broken.csv", "subject_id,label\nA,zero\n");
  EXPECT_EQ(cli("ingest --input broken.csv --output x.csv", dir), 3);
  EXPECT_EQ(cli("loso --input c.csv --output r.json --protocol nonsense", dir), 2);
}

TEST(Cli, ReportIsIndependentOfWorkerCount) {
  test::TempDir a, b;
  const std::string args = "--seed 5 synth --output c.csv --subjects-per-class 4 --features 5 --informative 2";
  ASSERT_EQ(cli(args, a), 0);
  ASSERT_EQ(cli(args, b), 0);
  const std::string loso = "loso --input c.csv --output r.json --k-sweep 2 --repetitions 3 --restarts 3";
  ASSERT_EQ(cli("--seed 5 --workers 1 " + loso, a), 0);
  ASSERT_EQ(cli("--seed 5 --workers 8 " + loso, b), 0);
  EXPECT_EQ(test::slurp(a / "r.json"), test::slurp(b / "r.json"));
}

TEST(Cli, RunSubcommandExecutesManifest) {
  test::TempDir dir;
  write_json_file(dir / "m.json", pipeline_manifest());
  EXPECT_EQ(cli("run '" + (dir / "m.json").string() + "'", dir), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "loso.json"));
  EXPECT_NE(test::slurp(dir / "stdout.txt").find("== stage 7 (loso)"), std::string::npos);
}

}  // namespace
}  // namespace boaw::stages
