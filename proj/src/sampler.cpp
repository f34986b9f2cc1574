#include "kbc/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "parallel.hpp"

namespace kbc {

void SamplerConfig::validate() const {
  if (sweeps < 1) throw Error(Errc::InvalidArgument, "sweeps must be at least 1");
  if (workers < 1) throw Error(Errc::InvalidArgument, "workers must be at least 1");
}

ChainState make_chain(const FactorGraph& graph, std::uint64_t seed, std::uint64_t stream) {
  return make_chain(graph, graph.initial_world(), seed, stream);
}

ChainState make_chain(const FactorGraph& graph, PossibleWorld world, std::uint64_t seed, std::uint64_t stream) {
  if (!graph.consistent(world)) throw Error(Errc::InvalidArgument, "chain start must be evidence-consistent");
  return ChainState{std::move(world), Philox(seed, stream), 0, graph.free_variables()};
}

std::vector<double> conditional_distribution(const FactorGraph& graph, std::uint32_t var, const PossibleWorld& world,
                                             std::span<const double> weights) {
  if (var >= graph.num_variables()) throw Error(Errc::InvalidArgument, "no such variable");
  if (!graph.variable(var).is_free())
    throw Error(Errc::ObservedVariable, "variable " + std::to_string(var) + " is observed");
  if (world.values.size() != graph.num_variables()) throw Error(Errc::UnassignedVariable, "world does not cover the graph");
  std::vector<double> p(graph.variable(var).cardinality);
  detail::log_scores(graph, var, world.values.data(), PlainWeights{weights.data()}, p.data());
  const double m = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& x : p) total += (x = std::exp(x - m));
  for (auto& x : p) x /= total;
  return p;
}

void gibbs_sweep(ChainState& state, const FactorGraph& graph, std::span<const double> weights, bool shuffle) {
  std::vector<double> scratch;
  detail::sweep(graph, state.order, state.world.values.data(), PlainWeights{weights.data()}, state.rng, shuffle,
                scratch, [](std::uint32_t) {});
  ++state.sweep;
}

bool Target::operator()(const PossibleWorld& w) const {
  if (auto* vv = std::get_if<std::pair<std::uint32_t, std::int32_t>>(&test)) return w.values[vv->first] == vv->second;
  return std::get<WorldIndicator>(test)(w);
}

std::vector<double> estimate_marginals(const FactorGraph& graph, std::span<const Target> targets,
                                       std::span<const double> weights, const SamplerConfig& config,
                                       std::uint64_t stream) {
  config.validate();
  auto chain = make_chain(graph, config.seed, stream);
  std::vector<double> scratch;
  const PlainWeights w{weights.data()};
  auto run = [&] {
    detail::sweep(graph, chain.order, chain.world.values.data(), w, chain.rng, config.shuffle, scratch,
                  [](std::uint32_t) {});
    ++chain.sweep;
  };
  for (std::size_t s = 0; s < config.burn_in_sweeps; ++s) run();
  std::vector<std::size_t> hits(targets.size(), 0);
  for (std::size_t s = 0; s < config.sweeps; ++s) {
    run();
    for (std::size_t t = 0; t < targets.size(); ++t) hits[t] += targets[t](chain.world) ? 1 : 0;
  }
  std::vector<double> out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) out[t] = static_cast<double>(hits[t]) / config.sweeps;
  return out;
}

std::vector<std::vector<double>> estimate_all_marginals(const FactorGraph& graph, std::span<const double> weights,
                                                        const SamplerConfig& config, std::uint64_t stream) {
  config.validate();
  auto chain = make_chain(graph, config.seed, stream);
  std::vector<double> scratch;
  const PlainWeights w{weights.data()};
  auto run = [&] {
    detail::sweep(graph, chain.order, chain.world.values.data(), w, chain.rng, config.shuffle, scratch,
                  [](std::uint32_t) {});
  };
  for (std::size_t s = 0; s < config.burn_in_sweeps; ++s) run();
  std::vector<std::vector<std::size_t>> counts(graph.num_variables());
  for (std::uint32_t v = 0; v < graph.num_variables(); ++v)
    if (graph.variable(v).is_discrete()) counts[v].assign(graph.variable(v).cardinality, 0);
  const auto discrete = graph.discrete_variables();
  for (std::size_t s = 0; s < config.sweeps; ++s) {
    run();
    for (auto v : discrete) ++counts[v][chain.world.values[v]];
  }
  std::vector<std::vector<double>> out(graph.num_variables());
  for (auto v : discrete) {
    out[v].resize(counts[v].size());
    for (std::size_t k = 0; k < counts[v].size(); ++k) out[v][k] = static_cast<double>(counts[v][k]) / config.sweeps;
  }
  return out;
}

std::vector<std::vector<double>> parallel_estimate(std::span<const FactorGraph> graphs,
                                                   std::span<const std::vector<Target>> targets,
                                                   std::span<const double> weights, const SamplerConfig& config) {
  config.validate();
  if (targets.size() != graphs.size()) throw Error(Errc::InvalidArgument, "one target list per graph required");
  std::vector<std::vector<double>> out(graphs.size());
  detail::parallel_for(graphs.size(), config.workers,
                       [&](std::size_t i) { out[i] = estimate_marginals(graphs[i], targets[i], weights, config, i); });
  return out;
}

SyntheticModel make_synthetic_model(const SyntheticGraphSpec& spec) {
  SyntheticModel model;
  Philox rng(spec.seed, stream_id(7, 0));
  const std::size_t n = spec.variables_per_graph;
  const auto pairs = static_cast<std::size_t>(spec.pairwise_per_variable * static_cast<double>(n) / 2.0);
  std::uint32_t next_weight = 0;
  for (std::size_t gi = 0; gi < spec.graphs; ++gi) {
    FactorGraph g(Value(static_cast<std::int64_t>(gi)));
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t v = 0; v < n; ++v) g.add_variable(VariableDecl{});
    for (std::uint32_t v = 0; v < n && spec.max_degree > 0; ++v) {
      LiteralRef lit{v, 1, true};
      g.add_factor(next_weight++, FactorKind::IndicatorConjunction, std::span(&lit, 1));
      ++degree[v];
    }
    for (std::size_t p = 0, attempts = 0; p < pairs && n > 1 && attempts < 20 * pairs + 20; ++attempts) {
      auto a = rng.below(static_cast<std::uint32_t>(n)), b = rng.below(static_cast<std::uint32_t>(n));
      if (a == b || degree[a] >= spec.max_degree || degree[b] >= spec.max_degree) continue;
      LiteralRef lits[2] = {{a, 1, true}, {b, 1, rng.below(2) == 0}};
      g.add_factor(next_weight++, FactorKind::IndicatorConjunction, lits);
      ++degree[a], ++degree[b], ++p;
    }
    g.finalize();
    model.graphs.push_back(std::move(g));
  }
  model.weights.resize(next_weight);
  for (auto& w : model.weights) w = (2.0 * rng.uniform() - 1.0) * spec.weight_range;
  return model;
}

ThroughputResult throughput_bench(const SamplerConfig& config, const SyntheticGraphSpec& spec) {
  return throughput_bench(config, make_synthetic_model(spec));
}

ThroughputResult throughput_bench(const SamplerConfig& config, const SyntheticModel& model) {
  config.validate();
  ThroughputResult r;
  r.workers = config.workers;
  std::vector<ChainState> chains;
  for (std::size_t i = 0; i < model.graphs.size(); ++i) {
    chains.push_back(make_chain(model.graphs[i], config.seed, i));
    r.variables += model.graphs[i].num_variables();
    r.resamplings += chains.back().order.size() * config.sweeps;
  }
  const PlainWeights w{model.weights.data()};
  const auto start = std::chrono::steady_clock::now();
  detail::parallel_for(model.graphs.size(), config.workers, [&](std::size_t i) {
    std::vector<double> scratch;
    auto& c = chains[i];
    for (std::size_t s = 0; s < config.sweeps; ++s)
      detail::sweep(model.graphs[i], c.order, c.world.values.data(), w, c.rng, config.shuffle, scratch,
                    [](std::uint32_t) {});
  });
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.vars_per_second = r.seconds > 0 ? static_cast<double>(r.resamplings) / r.seconds : 0.0;
  return r;
}

}  // namespace kbc
