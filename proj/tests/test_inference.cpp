#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kbc/factorgraph.hpp"
#include "kbc/random.hpp"
#include "kbc/sampler.hpp"
#include "support.hpp"

using namespace kbc;
using namespace kbc::testing;

namespace {

RandomGraphSpec mixed(std::size_t free_vars) {
  RandomGraphSpec s;
  s.free_vars = free_vars;
  s.observed_vars = 2;
  s.multinomial = 0.3;
  s.features = 2;
  s.max_literals = 3;
  s.pairwise = 1.5;
  s.tied = 6;
  return s;
}

}  // namespace

TEST(Philox, KnownAnswers) {
  EXPECT_EQ(Philox(0, 0).generate(0), (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox(~0ULL, ~0ULL).generate(~0ULL),
            (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox(0x299f31d0a4093822ULL, 0x0370734413198a2eULL).generate(0x85a308d3243f6a88ULL),
            (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAndHelpers) {
  Philox a(7, 1), b(7, 1), c(7, 2);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  EXPECT_NE(Philox(7, 1)(), c());
  Philox r(3);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hits[r.below(5)];
  }
  for (int h : hits) EXPECT_NEAR(h, 10000, 400);
  static_assert(stream_id(1, 2) == ((1ULL << 48) ^ 2ULL));
}

TEST(Exact, ProbabilitiesNormalize) {
  std::mt19937_64 rng(1);
  for (int f = 0; f < 30; ++f) {
    auto m = random_model(rng, mixed(1 + rng() % 8));
    double total = 0.0;
    for_each_world(m.graph, [&](const PossibleWorld& w) { total += exact_world_probability(m.graph, w, m.weights); });
    EXPECT_NEAR(total, 1.0, 1e-10);
    EXPECT_NEAR(exact_log_partition(m.graph, m.weights), oracle_table(m.graph, m.weights).log_z, 1e-9);
  }
}

TEST(Exact, MarginalsAndExpectationsMatchOracle) {
  std::mt19937_64 rng(2);
  for (int f = 0; f < 30; ++f) {
    auto m = random_model(rng, mixed(1 + rng() % 8));
    const auto got = exact_marginals(m.graph, m.weights);
    const auto want = oracle_marginals(m.graph, m.weights);
    for (std::size_t v = 0; v < want.size(); ++v)
      for (std::size_t k = 0; k < want[v].size(); ++k) EXPECT_NEAR(got[v][k], want[v][k], 1e-10);
    const auto ge = exact_feature_expectations(m.graph, m.weights);
    const auto we = oracle_expectations(m.graph, m.weights);
    for (std::size_t k = 0; k < we.size(); ++k) EXPECT_NEAR(ge[k], we[k], 1e-10);
  }
}

TEST(Exact, ObservedWorldsAndErrors) {
  std::mt19937_64 rng(3);
  auto m = random_model(rng, mixed(3));
  auto w = m.graph.initial_world();
  for (std::uint32_t v = 0; v < m.graph.num_variables(); ++v)
    if (m.graph.variable(v).is_discrete() && m.graph.variable(v).observed >= 0) {
      auto bad = w;
      bad.values[v] = (bad.values[v] + 1) % m.graph.variable(v).cardinality;
      EXPECT_EQ(exact_world_probability(m.graph, bad, m.weights), 0.0);
    }
  PossibleWorld short_world;
  try {
    factor_value(m.graph, m.graph.factors()[0], short_world);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnassignedVariable);
  }
  FactorGraph big;
  for (int i = 0; i < 26; ++i) big.add_variable({});
  big.finalize();
  try {
    exact_log_partition(big, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooLargeToEnumerate);
  }
}

TEST(Exact, RaisingAWeightFavoursItsWorlds) {
  FactorGraph g;
  g.add_variable({});
  const LiteralRef on{0, 1, true};
  g.add_factor(0, FactorKind::IndicatorConjunction, std::span(&on, 1));
  g.finalize();
  const PossibleWorld yes{{1}}, no{{0}};
  double prev = 0.0;
  for (double w = -3; w <= 3; w += 0.5) {
    const std::vector<double> ws = {w};
    const double ratio = exact_world_probability(g, yes, ws) / exact_world_probability(g, no, ws);
    EXPECT_GT(ratio, prev);
    EXPECT_NEAR(ratio, std::exp(w), 1e-12);
    prev = ratio;
  }
}

TEST(Conditional, MatchesOracle) {
  std::mt19937_64 rng(4);
  for (int f = 0; f < 40; ++f) {
    auto m = random_model(rng, mixed(1 + rng() % 9));
    for (int t = 0; t < 3; ++t) {
      const auto w = random_world(rng, m.graph);
      for (auto v : m.graph.free_variables()) {
        const auto got = conditional_distribution(m.graph, v, w, m.weights);
        const auto want = oracle_conditional(m.graph, v, w.values, m.weights);
        for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
      }
    }
  }
}

TEST(Conditional, RejectsEvidence) {
  std::mt19937_64 rng(5);
  auto m = random_model(rng, mixed(2));
  const auto w = m.graph.initial_world();
  for (std::uint32_t v = 0; v < m.graph.num_variables(); ++v)
    if (!m.graph.variable(v).is_free()) EXPECT_THROW(conditional_distribution(m.graph, v, w, m.weights), Error);
  EXPECT_THROW(conditional_distribution(m.graph, 999, w, m.weights), Error);
}

TEST(Gibbs, SweepPreservesTheExactDistribution) {
  // Push the exact distribution through one fixed-order sweep, one
  // single-site kernel at a time.
  std::mt19937_64 rng(6);
  for (int f = 0; f < 10; ++f) {
    auto m = random_model(rng, mixed(2 + rng() % 4));
    const auto table = oracle_table(m.graph, m.weights);
    std::map<std::vector<std::int32_t>, double> pi;
    for (std::size_t i = 0; i < table.worlds.size(); ++i) pi[table.worlds[i]] = table.prob[i];
    auto dist = pi;
    for (auto v : m.graph.free_variables()) {
      std::map<std::vector<std::int32_t>, double> next;
      for (const auto& [x, p] : dist) {
        const auto cond = conditional_distribution(m.graph, v, PossibleWorld{x}, m.weights);
        auto y = x;
        for (std::size_t k = 0; k < cond.size(); ++k) {
          y[v] = static_cast<std::int32_t>(k);
          next[y] += p * cond[k];
        }
      }
      dist = std::move(next);
    }
    for (const auto& [x, p] : pi) EXPECT_NEAR(dist[x], p, 1e-9);
  }
}

TEST(Gibbs, EstimatesConvergeToOracle) {
  std::mt19937_64 rng(7);
  RandomGraphSpec s;
  s.free_vars = 8;
  auto m = random_model(rng, s);
  SamplerConfig cfg;
  cfg.sweeps = 100000;
  cfg.seed = 3;
  const auto est = estimate_all_marginals(m.graph, m.weights, cfg);
  const auto want = oracle_marginals(m.graph, m.weights);
  for (std::size_t v = 0; v < want.size(); ++v) EXPECT_NEAR(est[v][1], want[v][1], 0.01);
}

TEST(Gibbs, JointQueryOnTwelveVariables) {
  std::mt19937_64 rng(8);
  RandomGraphSpec s;
  s.free_vars = 12;
  s.multinomial = 0.2;
  auto m = random_model(rng, s);
  const auto q = [](const PossibleWorld& w) { return w.values[0] == 1 && w.values[5] != 0; };
  SamplerConfig cfg;
  cfg.sweeps = 200000;
  cfg.seed = 9;
  const std::vector<Target> t = {Target(WorldIndicator(q))};
  const double est = estimate_marginals(m.graph, t, m.weights, cfg)[0];
  EXPECT_NEAR(est, exact_query_marginal(m.graph, q, m.weights), 0.01);
}

TEST(Gibbs, DeterministicAndIndependentOfWorkers) {
  std::mt19937_64 rng(10);
  std::vector<FactorGraph> graphs;
  std::vector<std::vector<Target>> targets;
  std::vector<double> weights;
  RandomGraphSpec s;
  s.free_vars = 6;
  s.tied = 8;
  for (int i = 0; i < 9; ++i) {
    auto m = random_model(rng, s);
    if (weights.empty()) weights = m.weights;
    graphs.push_back(std::move(m.graph));
    targets.push_back({Target(0, 1), Target(3, 0)});
  }
  SamplerConfig cfg;
  cfg.sweeps = 2000;
  cfg.seed = 11;
  const auto one = parallel_estimate(graphs, targets, weights, cfg);
  cfg.workers = 4;
  const auto four = parallel_estimate(graphs, targets, weights, cfg);
  EXPECT_EQ(one, four);
  cfg.workers = 1;
  for (std::size_t i = 0; i < graphs.size(); ++i)
    EXPECT_EQ(one[i], estimate_marginals(graphs[i], targets[i], weights, cfg, i));
}

TEST(Gibbs, EvidenceStaysClamped) {
  std::mt19937_64 rng(12);
  auto m = random_model(rng, mixed(5));
  auto chain = make_chain(m.graph, 5);
  for (int s = 0; s < 200; ++s) {
    gibbs_sweep(chain, m.graph, m.weights);
    ASSERT_TRUE(m.graph.consistent(chain.world));
  }
  EXPECT_EQ(chain.sweep, 200u);
}

TEST(Gibbs, ConfigValidation) {
  SamplerConfig c;
  c.sweeps = 0;
  EXPECT_THROW(c.validate(), Error);
  c.sweeps = 1;
  c.workers = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Synthetic, DegreeIsBounded) {
  SyntheticGraphSpec spec;
  spec.variables_per_graph = 2000;
  spec.max_degree = 10;
  const auto model = make_synthetic_model(spec);
  ASSERT_EQ(model.graphs.size(), 1u);
  const auto& g = model.graphs[0];
  for (std::uint32_t v = 0; v < g.num_variables(); ++v) EXPECT_LE(g.markov_blanket(v).size(), 10u);
  SamplerConfig cfg;
  cfg.sweeps = 2;
  const auto r = throughput_bench(cfg, model);
  EXPECT_EQ(r.resamplings, 4000u);
  EXPECT_GT(r.vars_per_second, 0.0);
}
