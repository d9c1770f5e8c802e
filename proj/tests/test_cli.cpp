#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "addrparse/cli.hpp"

namespace addrparse {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("ADDRPARSE_TEST_TMP");
  const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "addrparse_cli_test";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "addrparse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_samples(const fs::path& file, ConllCheck check = ConllCheck::kStrict) {
  return parse_conll(read_file(file), default_schema(), check).size();
}

TEST(Cli, GenerateWritesSplitFiles) {
  const fs::path dir = scratch("generate");
  const auto r = run({"generate", "--seed", "42", "--size", "1248", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_samples(dir / "train.conll"), 874u);
  EXPECT_EQ(count_samples(dir / "validation.conll"), 187u);
  EXPECT_EQ(count_samples(dir / "test.conll"), 187u);
  EXPECT_TRUE(fs::exists(dir / "schema.txt"));
  EXPECT_TRUE(fs::exists(dir / "lineage.txt"));
  EXPECT_TRUE(fs::exists(dir / "histogram.csv"));

  const fs::path again = scratch("generate_again");
  ASSERT_EQ(run({"generate", "--seed", "42", "--size", "1248", "--out", again.string()}).code, 0);
  EXPECT_EQ(read_file(dir / "train.conll"), read_file(again / "train.conll"));
}

TEST(Cli, EvaluateIdenticalFilesIsPerfect) {
  const fs::path dir = scratch("evaluate");
  // Macro scores average over all 25 tags, so a perfect 1.0 needs every tag present.
  ASSERT_EQ(run({"generate", "--size", "1248", "--out", dir.string()}).code, 0);
  const std::string test = (dir / "test.conll").string();
  ASSERT_EQ(label_histogram(parse_conll(read_file(test), default_schema())).size(), 25u);
  const auto r = run({"evaluate", "--gold", test, "--pred", test, "--out", (dir / "report").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| model | 1.000 | 1.000 | 1.000 | 1.000 | 1.000 |"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("| model | 1.000 | 1.000 | "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("| 1.000 | 1.000 |\n"), std::string::npos) << r.out;
  const std::string csv = read_file(dir / "report" / "report.csv");
  EXPECT_NE(csv.find("sample_accuracy_pct,100.0000"), std::string::npos);
  EXPECT_NE(csv.find("token_accuracy_pct,100.0000"), std::string::npos);
}

TEST(Cli, EvaluateRefusesTrainingSplit) {
  const fs::path dir = scratch("lineage");
  ASSERT_EQ(run({"generate", "--size", "30", "--out", dir.string()}).code, 0);
  const std::string train = (dir / "train.conll").string();
  const auto r = run({"evaluate", "--gold", train, "--pred", train});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("training split"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"generate", "--out", "x", "--bogus"}).code, 1);
  EXPECT_EQ(run({"generate"}).code, 1);  // --out is required
  EXPECT_EQ(run({"generate", "--size", "ten", "--out", "x"}).code, 1);
  EXPECT_EQ(run({"plot", "--out", "x.svg"}).code, 1);
  EXPECT_EQ(run({"train", "--variant", "base"}).code, 1);
}

TEST(Cli, DataErrorsExitTwo) {
  const fs::path dir = scratch("data_errors");
  write_file(dir / "bad.conll", "istanbul B-CITY\nbeşiktaş\n");
  auto r = run({"evaluate", "--gold", (dir / "bad.conll").string(), "--pred", (dir / "bad.conll").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_EQ(run({"generate", "--size", "5", "--out", (dir / "tiny").string()}).code, 2);
  EXPECT_EQ(run({"generate", "--size", "0", "--out", (dir / "zero").string()}).code, 2);
  EXPECT_EQ(run({"plot", "--hist", (dir / "missing.conll").string(), "--out", (dir / "h.svg").string()}).code, 2);

  write_file(dir / "g.conll", "istanbul B-CITY\n\n");
  write_file(dir / "p.conll", "ankara B-CITY\n\n");
  r = run({"evaluate", "--gold", (dir / "g.conll").string(), "--pred", (dir / "p.conll").string()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, HelpOnEverySubcommand) {
  for (const std::string sub : {"generate", "train", "hpo", "evaluate", "compare", "plot"}) {
    const auto r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, TrainEvaluateAndPlotRoundTrip) {
  const fs::path dir = scratch("train");
  ASSERT_EQ(run({"generate", "--size", "60", "--seed", "3", "--out", (dir / "data").string()}).code, 0);
  auto r = run({"train", "--data", (dir / "data").string(), "--variant", "small", "--head", "linear", "--epochs", "2",
                "--batch", "16", "--lr", "5e-3", "--runs", (dir / "runs").string(), "--trial-id", "t0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path run_dir = dir / "runs" / "small_linear" / "t0";
  EXPECT_TRUE(fs::exists(run_dir / "best.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir / "vocab.tsv"));
  EXPECT_EQ(read_file(run_dir / "train_log.csv").substr(0, 28), "epoch,train_loss,val_loss,lr");

  r = run({"evaluate", "--model", (run_dir / "best.ckpt").string(), "--data", (dir / "data" / "test.conll").string(),
           "--reps-out", (dir / "reps.csv").string(), "--pred-out", (dir / "pred.conll").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| small_LINEAR |"), std::string::npos);
  EXPECT_EQ(count_samples(dir / "pred.conll", ConllCheck::kTagsOnly), count_samples(dir / "data" / "test.conll"));

  r = run({"evaluate", "--model", (run_dir / "best.ckpt").string(), "--data", (dir / "data" / "train.conll").string()});
  EXPECT_EQ(r.code, 2);

  r = run({"plot", "--reps", (dir / "reps.csv").string(), "--out", (dir / "pca.svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"plot", "--hist", (dir / "data" / "train.conll").string(), "--out", (dir / "hist.svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "hist.svg").substr(0, 5), "<?xml");
}

TEST(Cli, HpoWritesStudyLog) {
  const fs::path dir = scratch("hpo");
  ASSERT_EQ(run({"generate", "--size", "40", "--out", (dir / "data").string()}).code, 0);
  const auto r = run({"hpo", "--data", (dir / "data").string(), "--variant", "small", "--head", "mlp", "--trials", "2",
                      "--epochs", "1", "--threads", "1", "--runs", (dir / "runs").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_file(dir / "runs" / "small_mlp" / "study.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Cli, CompareIsDeterministic) {
  const fs::path dir = scratch("compare");
  const std::string manifest =
      "[data]\nseed = 9\nsize = 40\n[variants]\nnames = small\nheads = linear, mlp\n"
      "[search]\nn_trials = 2\nmax_epochs = 1\nthreads = 1\n[output]\ndir = ";
  write_file(dir / "a.ini", manifest + "out_a\n");
  write_file(dir / "b.ini", manifest + "out_b\n");
  auto r = run({"compare", "--manifest", (dir / "a.ini").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(run({"compare", "--manifest", (dir / "b.ini").string()}).code, 0);
  for (const char* f : {"comparison.csv", "comparison.md", "head_comparison.svg", "observations.txt",
                        "runs/small_mlp/study.csv", "runs/small_linear/report.csv", "runs/small_mlp/representations.csv"}) {
    EXPECT_EQ(read_file(dir / "out_a" / f), read_file(dir / "out_b" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir / "out_a" / "label_histogram.svg"));
  EXPECT_TRUE(fs::exists(dir / "out_a" / "runs" / "small_linear" / "pca.svg"));
  EXPECT_NE(r.out.find("| small_LINEAR |"), std::string::npos);
  EXPECT_NE(r.out.find("small: MLP"), std::string::npos);
}

}  // namespace
}  // namespace addrparse
