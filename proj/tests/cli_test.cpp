#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace tdh {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "tdh");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) / "tdh_cli";
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "cfg.txt") << "code_length = 8\nhidden_dims = 16\nbatch_size = 16\nouter_iterations = 5\n";
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string p(const std::string& name) const { return (root_ / name).string(); }

  void gen(const std::string& dir, const std::string& seed = "3") {
    const Outcome r = invoke({"gen-data", "--out", p(dir), "--classes", "3", "--per-class", "20", "--dx", "10",
                              "--dy", "12", "--seed", seed});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path root_;
};

TEST(CliHelp, ListsEveryFlagWithTypeAndDefault) {
  const Outcome r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--out", "--classes", "--per-class", "--dx", "--dy", "--latent", "--noise", "--multilabel",
                           "--query-fraction", "--train-size", "--seed", "--config", "--data-dir", "--resume",
                           "--checkpoint-every", "--log-every", "--checkpoint", "--modality", "--split", "--index",
                           "--query", "--top", "--topn", "--r-cap", "--queries", "--database"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  for (const char* snippet : {"--classes UINT", "[100]", "--noise FLOAT", "[0.2]", "--top UINT [10]",
                              "[retrieval]", "[10]", "Exit codes"}) {
    EXPECT_NE(r.out.find(snippet), std::string::npos) << snippet;
  }
  for (const char* cmd : {"gen-data", "train", "encode", "retrieve", "eval", "export-curves"}) {
    EXPECT_NE(r.out.find(cmd), std::string::npos) << cmd;
  }
  const Outcome sub = invoke({"train", "--help"});
  EXPECT_EQ(sub.code, 0);
  EXPECT_NE(sub.out.find("--checkpoint-every"), std::string::npos);
}

TEST(CliErrors, DistinctExitCodesAndOneLineMessages) {
  const Outcome unknown = invoke({"gen-data", "--out", "x", "--bogus"});
  EXPECT_EQ(unknown.code, cli::kUsage);
  EXPECT_EQ(unknown.err.rfind("error: usage: ", 0), 0u) << unknown.err;
  EXPECT_EQ(count_lines(unknown.err), 1u);

  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"encode", "--modality", "audio", "--checkpoint", "c", "--data-dir", "d", "--out", "o"}).code,
            cli::kUsage);

  const Outcome missing = invoke({"train", "--config", "/nonexistent/cfg.txt", "--data-dir", "/nonexistent", "--out",
                                  "/nonexistent/out"});
  EXPECT_EQ(missing.code, cli::kIo);
  EXPECT_EQ(missing.err.rfind("error: io: ", 0), 0u) << missing.err;
  EXPECT_EQ(count_lines(missing.err), 1u);
}

TEST_F(CliPipeline, InvalidConfigAndNumericFailures) {
  gen("data");
  std::ofstream(root_ / "bad.txt") << "code_length = 8\nwidth = 3\n";
  const Outcome bad = invoke({"train", "--config", p("bad.txt"), "--data-dir", p("data"), "--out", p("ckpt")});
  EXPECT_EQ(bad.code, cli::kInvalidInput);
  EXPECT_EQ(bad.err.rfind("error: parse: ", 0), 0u) << bad.err;
  EXPECT_FALSE(fs::exists(root_ / "ckpt"));

  std::ofstream(root_ / "hot.txt") << "learning_rate = 1e4\nouter_iterations = 40\nhidden_dims = 16\n";
  const Outcome hot =
      invoke({"train", "--config", p("hot.txt"), "--data-dir", p("data"), "--out", p("hot"), "--log-every", "0"});
  EXPECT_EQ(hot.code, cli::kNumeric) << hot.err;
  EXPECT_EQ(hot.err.rfind("error: numeric: ", 0), 0u) << hot.err;
}

TEST_F(CliPipeline, EndToEndArtifacts) {
  gen("data");
  const Outcome train = invoke({"train", "--config", p("cfg.txt"), "--data-dir", p("data"), "--out", p("ckpt"),
                                "--seed", "1", "--log-every", "0"});
  ASSERT_EQ(train.code, 0) << train.err;
  for (const char* name : {"params_x.tdh", "params_y.tdh", "codes.tdhbin", "history.csv", "config.txt"}) {
    EXPECT_TRUE(fs::exists(root_ / "ckpt" / name)) << name;
  }
  EXPECT_EQ(count_lines(slurp(root_ / "ckpt" / "history.csv")), 6u);

  const Outcome ev = invoke({"eval", "--checkpoint", p("ckpt"), "--data-dir", p("data"), "--out", p("report")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  for (const char* dir : {"image_to_text", "text_to_image"}) {
    for (const char* name : {"map.csv", "pr_curve.csv", "topn.csv"}) {
      EXPECT_TRUE(fs::exists(root_ / "report" / dir / name)) << dir << "/" << name;
    }
  }
  EXPECT_EQ(count_lines(slurp(root_ / "report" / "image_to_text" / "pr_curve.csv")), 10u);

  ASSERT_EQ(invoke({"encode", "--checkpoint", p("ckpt"), "--data-dir", p("data"), "--modality", "image", "--out",
                    p("idx")}).code,
            0);
  {
    std::ifstream features(root_ / "data" / "features_x.csv");
    std::string first;
    std::getline(features, first);
    std::ofstream(root_ / "q.csv") << first << '\n';
  }
  const Outcome hits = invoke({"retrieve", "--index", p("idx"), "--query", p("q.csv"), "--modality", "text", "--top",
                               "10", "--checkpoint", p("ckpt")});
  ASSERT_EQ(hits.code, 0) << hits.err;
  EXPECT_EQ(count_lines(hits.out), 10u);
  std::istringstream lines(hits.out);
  std::string line;
  std::size_t last = 0;
  while (std::getline(lines, line)) {
    const auto comma = line.find(',');
    ASSERT_NE(comma, std::string::npos) << line;
    const std::size_t distance = std::stoul(line.substr(comma + 1));
    EXPECT_GE(distance, last);
    EXPECT_LE(distance, 8u);
    last = distance;
  }

  const Outcome wrong_dim = invoke({"retrieve", "--index", p("idx"), "--query", p("q.csv"), "--modality", "image",
                                    "--checkpoint", p("ckpt")});
  EXPECT_EQ(wrong_dim.code, cli::kInvalidInput);

  ASSERT_EQ(invoke({"encode", "--checkpoint", p("ckpt"), "--data-dir", p("data"), "--modality", "text", "--split",
                    "query", "--out", p("qidx")}).code,
            0);
  const Outcome curves =
      invoke({"export-curves", "--queries", p("qidx"), "--database", p("idx"), "--out", p("curves")});
  ASSERT_EQ(curves.code, 0) << curves.err;
  EXPECT_EQ(slurp(root_ / "curves" / "pr_curve.csv"), slurp(root_ / "report" / "text_to_image" / "pr_curve.csv"));
  EXPECT_EQ(slurp(root_ / "curves" / "map.csv"), slurp(root_ / "report" / "text_to_image" / "map.csv"));
}

TEST_F(CliPipeline, IdenticalRunsAreByteIdentical) {
  for (const std::string run : {"a", "b"}) {
    gen(run + "_data");
    ASSERT_EQ(invoke({"train", "--config", p("cfg.txt"), "--data-dir", p(run + "_data"), "--out", p(run + "_ckpt"),
                      "--seed", "4", "--log-every", "0"}).code,
              0);
    ASSERT_EQ(invoke({"eval", "--checkpoint", p(run + "_ckpt"), "--data-dir", p(run + "_data"), "--out",
                      p(run + "_report")}).code,
              0);
  }
  for (const char* dir : {"data", "ckpt", "report"}) {
    for (const auto& entry : fs::recursive_directory_iterator(root_ / (std::string("a_") + dir))) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), root_ / (std::string("a_") + dir));
      EXPECT_EQ(slurp(entry.path()), slurp(root_ / (std::string("b_") + dir) / rel)) << rel;
    }
  }
}

TEST_F(CliPipeline, SeedFallsBackToEnvironment) {
  gen("flag", "9");
  ::setenv("TDH_SEED", "9", 1);
  const Outcome env = invoke({"gen-data", "--out", p("env"), "--classes", "3", "--per-class", "20", "--dx", "10",
                              "--dy", "12"});
  ::unsetenv("TDH_SEED");
  ASSERT_EQ(env.code, 0) << env.err;
  EXPECT_EQ(slurp(root_ / "env" / "features_x.csv"), slurp(root_ / "flag" / "features_x.csv"));
  gen("other", "10");
  EXPECT_NE(slurp(root_ / "other" / "features_x.csv"), slurp(root_ / "flag" / "features_x.csv"));
}

}  // namespace
}  // namespace tdh
