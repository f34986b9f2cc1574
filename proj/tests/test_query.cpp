#include <gtest/gtest.h>

#include <numeric>

#include "kbc/catalog.hpp"
#include "kbc/factorgraph.hpp"
#include "kbc/kb.hpp"
#include "kbc/query.hpp"
#include "kbc/synth.hpp"

using namespace kbc;

namespace {

/// 40 images, the last 20 with hidden labels, truth weights loaded.
const KnowledgeBase& scene_kb() {
  static const KnowledgeBase kb = [] {
    SynthSpec spec;
    spec.template_name = "scene";
    spec.samples = 40;
    spec.test_fraction = 0.5;
    spec.attributes = 5;
    spec.metadata = true;
    spec.seed = 3;
    auto syn = synthesize(spec);
    auto k = compile_kb(syn.db, syn.rules_text);
    apply_weights(k.grounding, syn.truth);
    return k;
  }();
  return kb;
}

ConjunctiveQuery q(const std::string& text) {
  return parse_query(text, PredicateRegistry::from_database(scene_kb().db));
}

Errc parse_error(const std::string& text) {
  try {
    q(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << text;
  return Errc::InvalidArgument;
}

SamplerConfig sampler(std::size_t sweeps = 3000) {
  SamplerConfig c;
  c.sweeps = sweeps;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(QueryParse, SunnyBeach) {
  const auto query = q("sceneCategory(i, \"beach\")\nhasAttribute(i, \"sunny\")\n=> answer(i)\n");
  EXPECT_EQ(query.probabilistic.size(), 2u);
  EXPECT_TRUE(query.deterministic.empty());
  ASSERT_EQ(query.answer.size(), 1u);
  EXPECT_EQ(variable_name(query.answer[0]), "i");
  const auto again = q(format_query(query));
  EXPECT_EQ(again.literals, query.literals);
}

TEST(QueryParse, Errors) {
  EXPECT_EQ(parse_error("hasAttribute(i, \"sunny\")\n"), Errc::SyntaxError);
  EXPECT_EQ(parse_error("hasAttribute(i, \"sunny\")\n=> result(i)\n"), Errc::SyntaxError);
  EXPECT_EQ(parse_error("hasAttribute(i, \"sunny\")\n=> answer(j)\n"), Errc::UnboundAnswerVariable);
  EXPECT_EQ(parse_error("hasColour(i, \"red\")\n=> answer(i)\n"), Errc::UnknownPredicate);
  EXPECT_EQ(parse_error("hasAttribute(i)\n=> answer(i)\n"), Errc::ArityMismatch);
  EXPECT_EQ(parse_error("hasAttribute(i, \"sunny\")\nhasAttribute(j, \"warm\")\n=> answer(i, j)\n"),
            Errc::InvalidArgument);
}

TEST(Answer, DeterministicOnlyTuplesAreCertain) {
  const auto ans = answer(q("geoName(name, l)\n=> answer(name)\n"), scene_kb(), sampler(), 0);
  ASSERT_FALSE(ans.empty());
  for (std::size_t i = 0; i < ans.size(); ++i) {
    EXPECT_EQ(ans[i].probability, 1.0);
    if (i) EXPECT_LT(ans[i - 1].tuple, ans[i].tuple);
  }
  EXPECT_TRUE(answer(q("geoName(\"Atlantis\", l)\n=> answer(l)\n"), scene_kb(), sampler()).empty());
}

TEST(Answer, EvidenceDecidesObservedImages) {
  const auto& kb = scene_kb();
  const auto& rows = kb.db.table("hasAttribute").rows();
  for (const auto& r : rows) {
    if (r[2].is_null()) continue;
    const auto text = std::string(r[2].as_boolean() ? "!" : "") + "hasAttribute(" + r[0].to_literal() + ", " +
                      r[1].to_literal() + ")\n=> answer(" + r[0].to_literal() + ")\n";
    const auto query = q(text);
    const auto cands = bind_candidates(query, kb.db);
    ASSERT_EQ(cands.candidates.size(), 1u);
    EXPECT_EQ(tuple_marginal(query, cands.candidates[0], kb, sampler(100)), 0.0);
    break;
  }
}

TEST(Answer, GibbsTracksExactMarginals) {
  const auto& kb = scene_kb();
  const auto query = q("hasAttribute(i, \"sunny\")\n!sceneCategory(i, \"bar\")\n=> answer(i)\n");
  const auto cands = bind_candidates(query, kb.db);
  EXPECT_EQ(cands.candidates.size(), 40u);
  for (std::size_t i = 20; i < 23; ++i) {
    const double est = tuple_marginal(query, cands.candidates[i], kb, sampler(400000));
    const double exact = tuple_marginal(query, cands.candidates[i], kb, sampler(), Estimator::Exact);
    EXPECT_NEAR(est, exact, 0.01);
  }
}

TEST(Answer, OrderingTruncationAndConjunctionBound) {
  const auto& kb = scene_kb();
  const auto both = q("hasAttribute(i, \"sunny\")\nhasAffordance(i, \"travel\")\n=> answer(i)\n");
  const auto full = answer(both, kb, sampler(), 0);
  for (std::size_t i = 1; i < full.size(); ++i) {
    EXPECT_GE(full[i - 1].probability, full[i].probability);
    if (full[i - 1].probability == full[i].probability) EXPECT_LT(full[i - 1].tuple, full[i].tuple);
  }
  for (std::size_t k = 1; k < 12; ++k) {
    const auto a = answer(both, kb, sampler(), k);
    const auto b = answer(both, kb, sampler(), k + 1);
    ASSERT_EQ(a.size(), k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(a[i].tuple, b[i].tuple);
  }
  std::map<std::vector<Value>, double> pa, pb;
  for (const auto& t : answer(q("hasAttribute(i, \"sunny\")\n=> answer(i)\n"), kb, sampler(), 0))
    pa[t.tuple] = t.probability;
  for (const auto& t : answer(q("hasAffordance(i, \"travel\")\n=> answer(i)\n"), kb, sampler(), 0))
    pb[t.tuple] = t.probability;
  for (const auto& t : full) EXPECT_LE(t.probability, std::min(pa[t.tuple], pb[t.tuple]) + 0.02);
}

TEST(Answer, OneSampleFilter) {
  const auto& kb = scene_kb();
  const auto query = q("hasAttribute(i, \"sunny\")\n=> answer(i)\n");
  const auto one = answer(query, kb, sampler(), 0, Estimator::Exact, Value(25));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].tuple, std::vector<Value>{Value(25)});
  EXPECT_THROW(answer(query, kb, sampler(), 0, Estimator::Exact, Value(4000)), Error);
}

TEST(Answer, RepeatedBindingsFormADisjunction) {
  // Two attribute bindings of the same image: P(a or b), not a product.
  const auto& kb = scene_kb();
  const auto query = q("hasAttribute(i, a)\n=> answer(i)\n");
  const auto ans = answer(query, kb, sampler(), 0, Estimator::Exact, Value(30));
  ASSERT_EQ(ans.size(), 1u);
  const auto gi = *kb.grounding.graph_index(Value(30));
  const auto& g = kb.grounding.graphs[gi];
  const auto pred = *kb.grounding.predicate_index("hasAttribute");
  const double want = exact_query_marginal(
      g,
      [&](const PossibleWorld& w) {
        for (std::uint32_t v = 0; v < g.num_variables(); ++v)
          if (g.variable(v).predicate == pred && w.values[v] == 1) return true;
        return false;
      },
      kb.grounding.weights.values());
  EXPECT_NEAR(ans[0].probability, want, 1e-12);
}

TEST(Classify, DistributionsAndErrors) {
  const auto& kb = scene_kb();
  const auto cats = classify(Value(30), "sceneCategory", kb, sampler(), Estimator::Exact);
  ASSERT_EQ(cats.size(), 3u);
  double total = 0.0;
  for (const auto& c : cats) total += c.probability;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto exact = classify(Value(30), "hasAffordance", kb, sampler(), Estimator::Exact);
  const auto est = classify(Value(30), "hasAffordance", kb, sampler(200000));
  std::map<std::vector<Value>, double> e;
  for (const auto& s : exact) e[s.label] = s.probability;
  for (const auto& s : est) EXPECT_NEAR(s.probability, e[s.label], 0.01);
  EXPECT_THROW(classify(Value(999), "hasAffordance", kb, sampler()), Error);
  try {
    classify(Value(30), "hasFeature", kb, sampler());
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::UnknownFamily);
  }
}

TEST(Classify, SingleCategoryIsCertain) {
  SynthSpec spec;
  spec.template_name = "scene";
  spec.categories = 1;
  spec.samples = 3;
  spec.test_fraction = 1.0;
  auto syn = synthesize(spec);
  auto kb = compile_kb(syn.db, syn.rules_text);
  const auto c = classify(Value(0), "sceneCategory", kb, sampler(200));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].probability, 1.0);
}
