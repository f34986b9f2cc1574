#include "kbc/factorgraph.hpp"

#include <cmath>
#include <limits>

namespace kbc {

double factor_value(const FactorGraph& graph, const FactorInstance& factor, const PossibleWorld& world) {
  if (world.values.size() != graph.num_variables())
    throw Error(Errc::UnassignedVariable, "world assigns " + std::to_string(world.values.size()) +
                                              " variables, graph has " + std::to_string(graph.num_variables()));
  return eval_factor(graph, factor, world.values.data());
}

double log_weight(const FactorGraph& graph, const PossibleWorld& world, std::span<const double> weights) {
  if (world.values.size() != graph.num_variables())
    throw Error(Errc::UnassignedVariable, "world does not cover the graph");
  double total = 0.0;
  for (const auto& f : graph.factors()) total += weights[f.weight] * eval_factor(graph, f, world.values.data());
  return total;
}

double world_count(const FactorGraph& graph) {
  double n = 1.0;
  for (const auto& d : graph.variables())
    if (d.is_free()) n *= d.cardinality;
  return n;
}

void for_each_world(const FactorGraph& graph, const std::function<void(const PossibleWorld&)>& visit) {
  const double n = world_count(graph);
  if (n > kMaxEnumeratedWorlds)
    throw Error(Errc::TooLargeToEnumerate, "graph has " + std::to_string(n) + " worlds");
  const auto free = graph.free_variables();
  PossibleWorld world = graph.initial_world();
  while (true) {
    visit(world);
    std::size_t i = 0;
    for (; i < free.size(); ++i) {
      auto& x = world.values[free[i]];
      if (++x < graph.variable(free[i]).cardinality) break;
      x = 0;
    }
    if (i == free.size()) return;
  }
}

double exact_log_partition(const FactorGraph& graph, std::span<const double> weights) {
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for_each_world(graph, [&](const PossibleWorld& w) {
    const double lw = log_weight(graph, w, weights);
    if (lw > m) {
      s = s * std::exp(m - lw) + 1.0;
      m = lw;
    } else {
      s += std::exp(lw - m);
    }
  });
  return m + std::log(s);
}

double exact_world_probability(const FactorGraph& graph, const PossibleWorld& world, std::span<const double> weights) {
  if (!graph.consistent(world)) return 0.0;
  return std::exp(log_weight(graph, world, weights) - exact_log_partition(graph, weights));
}

double exact_query_marginal(const FactorGraph& graph, const WorldIndicator& indicator,
                            std::span<const double> weights) {
  const double log_z = exact_log_partition(graph, weights);
  double p = 0.0;
  for_each_world(graph, [&](const PossibleWorld& w) {
    if (indicator(w)) p += std::exp(log_weight(graph, w, weights) - log_z);
  });
  return std::min(1.0, p);
}

std::vector<std::vector<double>> exact_marginals(const FactorGraph& graph, std::span<const double> weights) {
  const double log_z = exact_log_partition(graph, weights);
  std::vector<std::vector<double>> out(graph.num_variables());
  for (std::size_t v = 0; v < out.size(); ++v)
    if (graph.variable(static_cast<std::uint32_t>(v)).is_discrete())
      out[v].assign(graph.variable(static_cast<std::uint32_t>(v)).cardinality, 0.0);
  for_each_world(graph, [&](const PossibleWorld& w) {
    const double p = std::exp(log_weight(graph, w, weights) - log_z);
    for (std::size_t v = 0; v < out.size(); ++v)
      if (!out[v].empty()) out[v][w.values[v]] += p;
  });
  return out;
}

std::vector<double> exact_feature_expectations(const FactorGraph& graph, std::span<const double> weights) {
  const double log_z = exact_log_partition(graph, weights);
  std::vector<double> out(weights.size(), 0.0);
  for_each_world(graph, [&](const PossibleWorld& w) {
    const double p = std::exp(log_weight(graph, w, weights) - log_z);
    for (const auto& f : graph.factors()) out[f.weight] += p * eval_factor(graph, f, w.values.data());
  });
  return out;
}

}  // namespace kbc
