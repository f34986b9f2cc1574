#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "kbc/bench.hpp"
#include "kbc/grounder.hpp"
#include "kbc/kb.hpp"
#include "kbc/learner.hpp"
#include "kbc/synth.hpp"
#include "support.hpp"

using namespace kbc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("kbc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

KnowledgeBase small_kb() {
  SynthSpec spec;
  spec.template_name = "scene";
  spec.samples = 12;
  spec.metadata = true;
  auto syn = synthesize(spec);
  auto kb = compile_kb(syn.db, syn.rules_text);
  apply_weights(kb.grounding, syn.truth);
  return kb;
}

Errc load_error(const fs::path& dir) {
  try {
    load_kb(dir);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "loaded";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(KbFiles, SaveLoadRoundTrip) {
  auto kb = small_kb();
  const auto dir = scratch("roundtrip");
  save_kb(dir, kb);
  const auto weights_hash = sha256_hex(slurp(dir / kWeightsFile));
  const auto back = load_kb(dir);
  EXPECT_EQ(back.grounding.weights, kb.grounding.weights);
  EXPECT_EQ(back.manifest.stats, kb.grounding.stats());
  EXPECT_EQ(back.manifest.stats.n_parameters, kb.grounding.weights.size());
  auto copy = back;
  const auto dir2 = scratch("roundtrip2");
  save_kb(dir2, copy);
  EXPECT_EQ(sha256_hex(slurp(dir2 / kWeightsFile)), weights_hash);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(KbFiles, DetectsTampering) {
  auto kb = small_kb();
  const auto dir = scratch("tamper");
  save_kb(dir, kb);
  const auto weights = slurp(dir / kWeightsFile);
  spit(dir / kWeightsFile, weights + "# edited\n");
  EXPECT_EQ(load_error(dir), Errc::HashMismatch);
  spit(dir / kWeightsFile, weights);
  EXPECT_NO_THROW(load_kb(dir));

  auto manifest = nlohmann::json::parse(slurp(dir / kManifestFile));
  manifest["format_version"] = "2.0";
  spit(dir / kManifestFile, manifest.dump(2));
  EXPECT_EQ(load_error(dir), Errc::VersionMismatch);
  EXPECT_EQ(load_error(dir / "nowhere"), Errc::IoError);
  fs::remove_all(dir);
}

TEST(KbFiles, StoreWeightsUpdatesManifest) {
  auto kb = small_kb();
  const auto dir = scratch("store");
  save_kb(dir, kb, false);
  EXPECT_FALSE(load_kb(dir).manifest.has_weights);
  kb.grounding.weights.set(0, 4.25);
  store_kb_weights(dir, kb);
  const auto back = load_kb(dir);
  EXPECT_TRUE(back.manifest.has_weights);
  EXPECT_EQ(back.grounding.weights[0], 4.25);
  fs::remove_all(dir);
}

TEST(KbFiles, ApplyWeightsRejectsUnknownKeys) {
  auto kb = small_kb();
  WeightStore extra({{99, {Value("x")}}});
  EXPECT_THROW(apply_weights(kb.grounding, extra), Error);
}

TEST(Synth, SameSeedSameData) {
  SynthSpec spec;
  spec.template_name = "scene";
  spec.samples = 30;
  spec.metadata = true;
  const auto a = synthesize(spec), b = synthesize(spec);
  for (const auto& [name, t] : a.db.tables()) EXPECT_EQ(serialize_table(t), serialize_table(b.db.table(name)));
  EXPECT_EQ(a.truth, b.truth);
  spec.seed = 2;
  EXPECT_NE(serialize_table(synthesize(spec).db.table("sceneCategory")), serialize_table(a.db.table("sceneCategory")));
}

TEST(Synth, LabelFrequenciesMatchTheModel) {
  SynthSpec spec;
  spec.samples = 1000;
  spec.seed = 6;
  const auto syn = synthesize(spec);
  const auto g = ground(parse_rule_file(syn.rules_text), syn.db);
  const auto corpus = make_corpus(g);
  ASSERT_EQ(corpus.examples.size(), 1000u);
  const auto& first = corpus.examples[0].graph;
  std::vector<double> freq(first.num_variables(), 0.0), model(first.num_variables(), 0.0);
  for (const auto& ex : corpus.examples) {
    const auto m = kbc::testing::oracle_marginals(ex.graph, syn.truth.values());
    for (std::uint32_t v = 0; v < ex.graph.num_variables(); ++v) {
      if (!ex.graph.variable(v).is_discrete()) continue;
      freq[v] += ex.data.values[v] / 1000.0;
      model[v] += m[v][1] / 1000.0;
    }
  }
  std::size_t labels = 0;
  for (std::uint32_t v = 0; v < first.num_variables(); ++v)
    if (first.variable(v).is_discrete()) {
      EXPECT_NEAR(freq[v], model[v], 0.03);
      ++labels;
    }
  EXPECT_EQ(labels, 6u);
}

TEST(Synth, WithoutCorrelationsLabelsAreIndependent) {
  SynthSpec spec;
  spec.correlations = false;
  spec.feature_dim = 0;
  spec.samples = 5;
  const auto syn = synthesize(spec);
  for (const auto& r : parse_rule_file(syn.rules_text)) EXPECT_EQ(r.body.size(), 1u);
}

TEST(Synth, SpecErrors) {
  SynthSpec spec;
  spec.samples = 0;
  try {
    synthesize(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidSize);
  }
  spec.samples = 1;
  spec.attributes = 30;
  try {
    synthesize(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooLargeToEnumerate);
  }
  EXPECT_THROW(parse_synth_spec("{\"colour\": 1}"), Error);
  EXPECT_THROW(parse_synth_spec("[]"), Error);
  const auto s = parse_synth_spec(format_synth_spec(SynthSpec{}));
  EXPECT_EQ(s.samples, SynthSpec{}.samples);
}

TEST(Synth, WritesAllArtifacts) {
  SynthSpec spec;
  spec.samples = 4;
  const auto dir = scratch("synth");
  write_synth(dir, spec, synthesize(spec));
  for (const char* f : {"data/schema.ini", "rules.kbr", "truth_weights.tsv", "spec.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NO_THROW(Database::load(dir / "data"));
  fs::remove_all(dir);
}

TEST(Bench, SlopeAndCsv) {
  const std::vector<std::pair<double, double>> pts = {{10, 3}, {100, 30}, {1000, 300}};
  EXPECT_NEAR(*log_log_slope(pts), 1.0, 1e-12);
  const std::vector<std::pair<double, double>> one = {{10, 3}};
  EXPECT_FALSE(log_log_slope(one));

  SynthSpec base;
  LearnConfig cfg;
  cfg.epochs = 1;
  const std::vector<std::size_t> single = {20};
  const auto r = scaling_bench(single, base, cfg);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.points[0].n_variables, 160u);
  const auto csv = format_scaling_csv(r);
  EXPECT_EQ(csv.rfind("n_variables,wall_seconds\n", 0), 0u);
  EXPECT_NE(csv.find("# slope,n/a"), std::string::npos);
  for (const auto& bad : {std::vector<std::size_t>{}, std::vector<std::size_t>{0, 10}, std::vector<std::size_t>{10, 10}}) {
    try {
      scaling_bench(bad, base, cfg);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidSize);
    }
  }
}

TEST(Bench, SpecParsing) {
  const auto s = parse_bench_spec(R"({"mode": "throughput", "variables_per_graph": 500, "workers": [1, 2]})");
  EXPECT_EQ(s.mode, "throughput");
  EXPECT_EQ(s.graphs.variables_per_graph, 500u);
  EXPECT_EQ(s.workers, (std::vector<unsigned>{1, 2}));
  EXPECT_THROW(parse_bench_spec(R"({"mode": "fastest"})"), Error);
}
