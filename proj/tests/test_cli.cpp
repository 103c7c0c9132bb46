#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <cautious/cautious.hpp>

#include "cli_app.hpp"
#include "test_support.hpp"

namespace cautious {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"cautious"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cautious_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, TrainBuiltinIris) {
  const auto r = run_cli({"train", "--builtin", "iris", "--out", path("iris"), "--alpha", "0.05", "--quantile",
                          "empirical", "--min-cal-size", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("trained 3 classes"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("label,n_fit,n_cal,alpha,threshold,omitted"), std::string::npos);
  const auto model = load_model(path("iris"));
  EXPECT_EQ(model.labels(), (std::vector<ClassLabel>{"setosa", "versicolor", "virginica"}));
  EXPECT_EQ(model.active_classes(), 3u);
}

TEST_F(Cli, RejectsBadAlpha) {
  const auto r = run_cli({"train", "--builtin", "iris", "--out", path("m"), "--alpha", "1.5"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpha must be in (0,1)"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("m")));
}

TEST_F(Cli, RejectsBadFlags) {
  EXPECT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m"), "--estimator", "svm"}).code, 2);
  EXPECT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m"), "--bandwidth", "-1"}).code, 2);
  EXPECT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m"), "--split-ratio", "1.0"}).code, 2);
  EXPECT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m"), "--lambda", "-0.5"}).code, 2);
  EXPECT_EQ(run_cli({"train", "--out", path("m")}).code, 2);
  EXPECT_EQ(run_cli({"train", "--builtin", "mnist", "--out", path("m")}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"predict", "--model", path("absent"), "--builtin", "iris", "--out", path("p.csv")}).code, 4);
}

TEST_F(Cli, SameSeedGivesIdenticalModelDirectories) {
  save_features_csv(path("train.csv"), synth_mixture(testing::three_class_mixture(600, 1)));
  for (const char* name : {"m1", "m2"}) {
    ASSERT_EQ(run_cli({"train", "--features", path("train.csv"), "--out", path(name), "--seed", "17"}).code, 0);
  }
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(path("m1"))) {
    EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "m2" / entry.path().filename())) << entry.path();
    ++files;
  }
  EXPECT_EQ(files, 4u);
  ASSERT_EQ(run_cli({"train", "--features", path("train.csv"), "--out", path("m3"), "--seed", "18"}).code, 0);
  EXPECT_NE(slurp(dir_ / "m1" / class_file_name("a")), slurp(dir_ / "m3" / class_file_name("a")));
}

TEST_F(Cli, PredictSeparatedClasses) {
  save_features_csv(path("train.csv"), synth_mixture(testing::two_separated_classes(1000, 2)));
  save_features_csv(path("eval.csv"), synth_mixture(testing::two_separated_classes(1000, 3)));
  ASSERT_EQ(run_cli({"train", "--features", path("train.csv"), "--out", path("m"), "--alpha", "0.1"}).code, 0);
  const auto r = run_cli({"predict", "--model", path("m"), "--features", path("eval.csv"), "--out", path("p.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = lines_of(slurp(path("p.csv")));
  ASSERT_EQ(lines.size(), 1001u);
  EXPECT_EQ(lines[0], "id,labels,set_size,is_null");
  double total = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    ASSERT_EQ(fields.size(), 4u);
    total += parse_double(fields[2]).value();
    EXPECT_EQ(fields[3] == "true", fields[2] == "0");
  }
  const double mean = total / 1000.0;
  EXPECT_GE(mean, 0.8);
  EXPECT_LE(mean, 1.2);
}

TEST_F(Cli, PredictWrongDimensionAndHeaderOnly) {
  ASSERT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m")}).code, 0);
  std::ofstream(path("wide.csv")) << "id,label,f0,f1,f2\nq,,1,2,3\n";
  const auto wide = run_cli({"predict", "--model", path("m"), "--features", path("wide.csv"), "--out", path("p.csv")});
  EXPECT_EQ(wide.code, 3);
  EXPECT_NE(wide.err.find("DimensionMismatch"), std::string::npos) << wide.err;

  std::ofstream(path("empty.csv")) << "id,label,f0,f1\n";
  const auto empty = run_cli({"predict", "--model", path("m"), "--features", path("empty.csv"), "--out", path("e.csv")});
  EXPECT_EQ(empty.code, 0);
  EXPECT_NE(empty.err.find("warning"), std::string::npos);
  EXPECT_EQ(slurp(path("e.csv")), "id,labels,set_size,is_null\n");

  std::ofstream(path("ragged.csv")) << "id,label,f0,f1\nq,,1\n";
  EXPECT_EQ(run_cli({"predict", "--model", path("m"), "--features", path("ragged.csv"), "--out", path("r.csv")}).code,
            3);
}

TEST_F(Cli, SweepGrid) {
  save_features_csv(path("train.csv"), synth_mixture(testing::three_class_mixture(1500, 4)));
  save_features_csv(path("eval.csv"), synth_mixture(testing::three_class_mixture(1000, 5)));
  ASSERT_EQ(run_cli({"train", "--features", path("train.csv"), "--out", path("m")}).code, 0);
  const auto r = run_cli({"sweep", "--model", path("m"), "--features", path("eval.csv"), "--alphas", "0.05:0.95:0.05"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto reports = read_reports_csv(in);
  ASSERT_EQ(reports.size(), 19u);
  EXPECT_DOUBLE_EQ(reports.front().alpha, 0.05);
  EXPECT_DOUBLE_EQ(reports.back().alpha, 0.95);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    EXPECT_LE(reports[i].ambiguity, reports[i - 1].ambiguity);
    EXPECT_GE(reports[i].null_rate, reports[i - 1].null_rate);
  }
  EXPECT_EQ(run_cli({"sweep", "--model", path("m"), "--features", path("eval.csv"), "--alphas", "0.5:0.1:0.1"}).code,
            2);
  EXPECT_EQ(run_cli({"sweep", "--model", path("m"), "--features", path("eval.csv"), "--alphas", "abc"}).code, 2);
}

TEST_F(Cli, EvaluateOnCalibrationDataMeetsTarget) {
  // With the empirical rule every class covers at least 1 - alpha of its own
  // calibration points, so evaluating on exactly those points must too.
  const auto data = synth_mixture(testing::three_class_mixture(900, 6));
  save_features_csv(path("train.csv"), data);
  ASSERT_EQ(run_cli({"train", "--features", path("train.csv"), "--out", path("m"), "--quantile", "empirical",
                     "--alpha", "0.2"})
                .code,
            0);
  const auto model = load_model(path("m"));
  LabeledDataset cal(2);
  std::size_t i = 0;
  for (const auto& [label, m] : model.classes()) {
    for (std::size_t r = 0; r < m->calibration_points.size(); ++r) {
      cal.add("c" + std::to_string(i++), label, m->calibration_points.point(r));
    }
  }
  save_features_csv(path("cal.csv"), cal);
  const auto r = run_cli({"evaluate", "--model", path("m"), "--features", path("cal.csv"), "--out", path("r.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto reports = [&] {
    std::ifstream in(path("r.csv"));
    return read_reports_csv(in);
  }();
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_GE(reports[0].coverage, 0.8);
  for (const auto& [label, cov] : evaluate(model, cal).per_class_coverage) EXPECT_GE(cov, 0.8) << label;
}

TEST_F(Cli, Topk) {
  ASSERT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m")}).code, 0);
  const auto ok = run_cli({"topk", "--model", path("m"), "--builtin", "iris", "--k", "3"});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("top-3 accuracy=1"), std::string::npos) << ok.out;
  const auto bad = run_cli({"topk", "--model", path("m"), "--builtin", "iris", "--k", "4"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("exceeds"), std::string::npos);
}

TEST_F(Cli, PerClassAlphaAndInteraction) {
  std::ofstream(path("alphas.csv")) << "label,alpha\nsetosa,0.3\n";
  ASSERT_EQ(run_cli({"train", "--builtin", "iris", "--out", path("m"), "--per-class-alpha", path("alphas.csv"),
                     "--lambda", "auto", "--min-cal-size", "5"})
                .code,
            0);
  const auto model = load_model(path("m"));
  EXPECT_EQ(model.at("setosa").alpha, 0.3);
  EXPECT_EQ(model.at("virginica").alpha, 0.1);
  EXPECT_TRUE(model.interaction());
  EXPECT_EQ(model.lambda(), 0.5);
}

TEST(CliMisc, VersionAndHelp) {
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, "cautious 1.0.0 (model format 1)\n");
  const auto h = run_cli({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("train"), std::string::npos);
  EXPECT_NE(h.out.find("sweep"), std::string::npos);
}

TEST(CliMisc, AlphaGrid) {
  EXPECT_EQ(cli::parse_alpha_grid("0.05:0.95:0.05").size(), 19u);
  EXPECT_EQ(cli::parse_alpha_grid("0.1:0.1:0.1"), std::vector<double>{0.1});
  EXPECT_THROW(cli::parse_alpha_grid("0.1:0.9"), cli::UsageError);
  EXPECT_THROW(cli::parse_alpha_grid("0.1:0.9:0"), cli::UsageError);
  EXPECT_THROW(cli::parse_alpha_grid("0:0.9:0.1"), cli::UsageError);
}

}  // namespace
}  // namespace cautious
