#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "kbc/factorgraph.hpp"
#include "kbc/graph.hpp"
#include "kbc/random.hpp"

namespace kbc {

struct SamplerConfig {
  std::size_t burn_in_sweeps = 100;
  std::size_t sweeps = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool shuffle = true;

  /// Throws InvalidArgument unless sweeps >= 1 and workers >= 1.
  void validate() const;
};

/// A Markov chain over one graph. `order` is the scan order of the free
/// variables, reshuffled every sweep when shuffling is on.
struct ChainState {
  PossibleWorld world;
  Philox rng;
  std::size_t sweep = 0;
  std::vector<std::uint32_t> order;
};

/// A chain started at the graph's initial world.
ChainState make_chain(const FactorGraph& graph, std::uint64_t seed, std::uint64_t stream = 0);
/// A chain started at `world`, which must be evidence-consistent.
ChainState make_chain(const FactorGraph& graph, PossibleWorld world, std::uint64_t seed, std::uint64_t stream = 0);

struct PlainWeights {
  const double* w;
  double operator[](std::size_t i) const noexcept { return w[i]; }
};

/// Relaxed single-value loads: no torn reads, no ordering.
struct AtomicWeights {
  const std::atomic<double>* w;
  double operator[](std::size_t i) const noexcept { return w[i].load(std::memory_order_relaxed); }
};

namespace detail {

/// Unnormalized log scores of every value of `v` given the rest of `values`.
template <class Weights>
inline void log_scores(const FactorGraph& g, std::uint32_t v, const std::int32_t* values, const Weights& w,
                       double* out) {
  const std::int32_t k = g.variable(v).cardinality;
  for (std::int32_t x = 0; x < k; ++x) out[x] = 0.0;
  const auto& factors = g.factors();
  for (auto fi : g.markov_blanket(v)) {
    const auto& f = factors[fi];
    const double wk = w[f.weight];
    if (wk == 0.0) continue;
    // Literals on other variables gate the factor; literals on v pick values.
    const LiteralRef* lit = g.literal_pool().data() + f.first;
    bool gated = false;
    std::int32_t need = -1, avoid_count = 0, avoid = -1;
    bool contradiction = false;
    for (std::uint32_t i = 0; i < f.count; ++i, ++lit) {
      if (lit->var != v) {
        if ((values[lit->var] == lit->value) != lit->positive) {
          gated = true;
          break;
        }
      } else if (lit->positive) {
        if (need >= 0 && need != lit->value) contradiction = true;
        need = lit->value;
      } else {
        if (avoid_count == 0) avoid = lit->value, avoid_count = 1;
        else if (avoid != lit->value) avoid_count = 2;
      }
    }
    if (gated || contradiction) continue;
    const double s = wk * f.coefficient;
    if (need >= 0) {
      if (avoid_count == 0 || (avoid_count == 1 && avoid != need)) out[need] += s;
      else if (avoid_count == 2) {
        // Several distinct avoided values: check directly.
        if (eval_factor(g, f, values, v, need) != 0.0) out[need] += s;
      }
    } else if (avoid_count == 0) {
      for (std::int32_t x = 0; x < k; ++x) out[x] += s;
    } else if (avoid_count == 1) {
      for (std::int32_t x = 0; x < k; ++x)
        if (x != avoid) out[x] += s;
    } else {
      for (std::int32_t x = 0; x < k; ++x)
        if (eval_factor(g, f, values, v, x) != 0.0) out[x] += s;
    }
  }
}

/// Draws a value from softmax(`scores[0..k)`), overwriting `scores`.
inline std::int32_t draw(double* scores, std::int32_t k, Philox& rng) {
  if (k == 2) {
    const double d = scores[1] - scores[0];
    const double p1 = d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
    return rng.uniform() < p1 ? 1 : 0;
  }
  double m = scores[0];
  for (std::int32_t x = 1; x < k; ++x) m = std::max(m, scores[x]);
  double total = 0.0;
  for (std::int32_t x = 0; x < k; ++x) total += (scores[x] = std::exp(scores[x] - m));
  double u = rng.uniform() * total;
  for (std::int32_t x = 0; x < k - 1; ++x) {
    u -= scores[x];
    if (u < 0) return x;
  }
  return k - 1;
}

template <class Weights>
inline std::int32_t resample(const FactorGraph& g, std::uint32_t v, std::int32_t* values, const Weights& w,
                             Philox& rng, std::vector<double>& scratch) {
  const std::int32_t k = g.variable(v).cardinality;
  if (scratch.size() < static_cast<std::size_t>(k)) scratch.resize(k);
  log_scores(g, v, values, w, scratch.data());
  return values[v] = draw(scratch.data(), k, rng);
}

/// One sweep over `order`, shuffled first when requested. `after(v)` runs
/// after each variable is resampled.
template <class Weights, class After>
inline void sweep(const FactorGraph& g, std::vector<std::uint32_t>& order, std::int32_t* values, const Weights& w,
                  Philox& rng, bool shuffle, std::vector<double>& scratch, After&& after) {
  if (shuffle)
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
  for (auto v : order) {
    resample(g, v, values, w, rng, scratch);
    after(v);
  }
}

}  // namespace detail

/// Pr[v = k | rest of `world`] for every k. Throws ObservedVariable for
/// evidence and observed variables, InvalidArgument for out-of-range ids.
std::vector<double> conditional_distribution(const FactorGraph& graph, std::uint32_t var, const PossibleWorld& world,
                                             std::span<const double> weights);

/// Resamples every free variable once.
void gibbs_sweep(ChainState& state, const FactorGraph& graph, std::span<const double> weights, bool shuffle = true);

/// Either "variable `var` takes value `value`" or an arbitrary indicator.
struct Target {
  std::variant<std::pair<std::uint32_t, std::int32_t>, WorldIndicator> test;

  Target(std::uint32_t var, std::int32_t value) : test(std::make_pair(var, value)) {}
  Target(WorldIndicator f) : test(std::move(f)) {}
  bool operator()(const PossibleWorld& w) const;
};

/// Fraction of post-burn-in sweeps in which each target holds.
std::vector<double> estimate_marginals(const FactorGraph& graph, std::span<const Target> targets,
                                       std::span<const double> weights, const SamplerConfig& config,
                                       std::uint64_t stream = 0);

/// Every variable's value frequencies (continuous variables stay empty).
std::vector<std::vector<double>> estimate_all_marginals(const FactorGraph& graph, std::span<const double> weights,
                                                        const SamplerConfig& config, std::uint64_t stream = 0);

/// estimate_marginals over many graphs, split across `config.workers`
/// threads. Graph i always uses stream i, so results do not depend on the
/// worker count.
std::vector<std::vector<double>> parallel_estimate(std::span<const FactorGraph> graphs,
                                                   std::span<const std::vector<Target>> targets,
                                                   std::span<const double> weights, const SamplerConfig& config);

/// A family of disconnected random graphs for benchmarks.
struct SyntheticGraphSpec {
  std::size_t graphs = 1;
  std::size_t variables_per_graph = 1000;
  /// Maximum number of factors touching one variable.
  std::size_t max_degree = 10;
  /// Pairwise factors per variable (on average); each variable also gets a unary factor.
  double pairwise_per_variable = 4.0;
  double weight_range = 2.0;
  std::uint64_t seed = 1;
};

struct SyntheticModel {
  std::vector<FactorGraph> graphs;
  std::vector<double> weights;
};

SyntheticModel make_synthetic_model(const SyntheticGraphSpec& spec);

struct ThroughputResult {
  std::size_t variables = 0;
  unsigned workers = 1;
  std::size_t resamplings = 0;
  double seconds = 0.0;
  double vars_per_second = 0.0;
};

/// Times `config.sweeps` sweeps over every graph of the model.
ThroughputResult throughput_bench(const SamplerConfig& config, const SyntheticGraphSpec& spec);
ThroughputResult throughput_bench(const SamplerConfig& config, const SyntheticModel& model);

}  // namespace kbc
