#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kBin = KBC_BIN;
const std::string kRoot = KBC_SOURCE_DIR;

struct Run {
  int code = -1;
  std::string out;
};

Run kbc(const std::string& args) {
  const std::string cmd = kBin + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kbc_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kData = "--data-dir " + kRoot + "/data/scene/data";
const std::string kRules = kRoot + "/data/image_rules.kbr";

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(kbc("").code, 1);
  EXPECT_EQ(kbc("frobnicate").code, 1);
  EXPECT_EQ(kbc("query --kb x").code, 1);
  EXPECT_EQ(kbc("--help").code, 0);
}

TEST(Cli, IngestPrintsTableStats) {
  const auto r = kbc(kData + " ingest");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("hasAffordance"), std::string::npos);
  EXPECT_NE(r.out.find("positives per sample"), std::string::npos);
  EXPECT_EQ(kbc("--data-dir /nonexistent ingest").code, 2);
}

TEST(Cli, PipelineQueryAndOracle) {
  const auto dir = scratch("pipeline");
  const auto dry = kbc(kData + " pipeline --dry-run --rules " + kRules + " --out " + dir.string());
  ASSERT_EQ(dry.code, 0) << dry.out;
  EXPECT_FALSE(fs::exists(dir / "weights.tsv"));

  const auto run = kbc(kData + " --seed 3 pipeline --epochs 2 --rules " + kRules + " --out " + dir.string());
  ASSERT_EQ(run.code, 0) << run.out;
  EXPECT_EQ(run.out, dry.out);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_NE(run.out.find("parameters\t" + std::to_string(manifest["stats"]["n_parameters"].get<std::size_t>())),
            std::string::npos);

  const auto q = " query --kb " + dir.string() + " --query " + kRoot + "/data/queries/hotel_boston.kbq --top 3";
  const auto a = kbc(q), b = kbc(q);
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("1\t(", 0), 0u);
  const auto js = kbc(q + " --json");
  ASSERT_EQ(js.code, 0);
  EXPECT_EQ(nlohmann::json::parse(js.out).size(), 3u);

  const auto o = kbc("oracle --kb " + dir.string() + " --sample 190");
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("sceneCategory(190)"), std::string::npos);
  EXPECT_EQ(kbc("oracle --kb " + dir.string() + " --sample 4000").code, 2);

  const auto learn = kbc("learn --kb " + dir.string() + " --epochs 1 --out " + (dir / "w.tsv").string());
  ASSERT_EQ(learn.code, 0) << learn.out;
  EXPECT_TRUE(fs::exists(dir / "w.tsv.metrics.json"));
  EXPECT_EQ(kbc("learn --kb " + dir.string() + " --granularity sometimes").code, 1);
  fs::remove_all(dir);
}

TEST(Cli, StageErrorsNameTheStage) {
  const auto r = kbc(kData + " pipeline --rules /missing/rules.kbr --out /tmp/x");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("compile"), std::string::npos);
  EXPECT_NE(r.out.find("/missing/rules.kbr"), std::string::npos);
}

TEST(Cli, NumericalErrorsExitThree) {
  const auto dir = scratch("numerical");
  ASSERT_EQ(kbc(kData + " compile --rules " + kRules + " --out " + dir.string()).code, 0);
  const auto r = kbc("learn --kb " + dir.string() + " --eta 1e308 --epochs 1");
  EXPECT_EQ(r.code, 3) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, SynthAndBench) {
  const auto dir = scratch("synth");
  const auto r = kbc("synth --spec " + kRoot + "/data/specs/recovery.json --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "truth_weights.tsv"));
  const auto spec = dir / "bench.json";
  std::ofstream(spec) << R"({"mode": "throughput", "variables_per_graph": 2000, "workers": [1, 2], "sweeps": 2})";
  const auto b = kbc("bench --spec " + spec.string());
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(b.out.rfind("graph_size,workers,vars_per_second\n2000,1,", 0), 0u);
  fs::remove_all(dir);
}
