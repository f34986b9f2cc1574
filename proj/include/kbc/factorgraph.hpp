#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kbc/graph.hpp"

namespace kbc {

/// Upper bound on the number of discrete worlds the exact routines will visit.
inline constexpr double kMaxEnumeratedWorlds = 33554432.0;  // 2^25

/// Throws UnassignedVariable when `world` does not cover the graph.
double factor_value(const FactorGraph& graph, const FactorInstance& factor, const PossibleWorld& world);

/// Sum of weight times factor value over every factor of the graph.
double log_weight(const FactorGraph& graph, const PossibleWorld& world, std::span<const double> weights);

/// Number of evidence-consistent discrete worlds (product of free cardinalities).
double world_count(const FactorGraph& graph);

/// Visits every evidence-consistent world in mixed-radix order over the free
/// variables. Throws TooLargeToEnumerate past kMaxEnumeratedWorlds.
void for_each_world(const FactorGraph& graph, const std::function<void(const PossibleWorld&)>& visit);

double exact_log_partition(const FactorGraph& graph, std::span<const double> weights);

/// 0 for worlds that contradict the evidence.
double exact_world_probability(const FactorGraph& graph, const PossibleWorld& world, std::span<const double> weights);

using WorldIndicator = std::function<bool(const PossibleWorld&)>;

double exact_query_marginal(const FactorGraph& graph, const WorldIndicator& indicator,
                            std::span<const double> weights);

/// Exact distribution of every variable: `result[v][k] = Pr[v = k]`.
/// Continuous variables get an empty vector.
std::vector<std::vector<double>> exact_marginals(const FactorGraph& graph, std::span<const double> weights);

/// Expected value of every factor-feature per weight index, summed over the
/// graph's factors: E[sum_{f with weight k} f(I)].
std::vector<double> exact_feature_expectations(const FactorGraph& graph, std::span<const double> weights);

}  // namespace kbc
