#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kbc/catalog.hpp"
#include "kbc/datastore.hpp"
#include "kbc/graph.hpp"
#include "kbc/rulelang.hpp"

namespace kbc {

struct GroundOptions {
  /// Abort with DomainExplosion when the projected factor count exceeds this.
  double max_factors = 1e9;
  unsigned workers = 1;
};

struct GroundingStats {
  std::size_t n_variables = 0;
  std::size_t n_factors = 0;
  std::size_t n_parameters = 0;

  friend bool operator==(const GroundingStats&, const GroundingStats&) = default;
};

/// The grounded model: one finalized factor graph per sample id (sorted),
/// all sharing one weight store.
struct Grounding {
  /// Names of variable-backed predicates; VariableDecl::predicate indexes this.
  std::vector<std::string> predicates;
  /// Category labels per predicate (empty for non-multinomial predicates).
  std::vector<std::vector<Value>> domains;
  std::vector<FactorGraph> graphs;
  WeightStore weights;

  std::optional<std::size_t> graph_index(const Value& sample) const;
  std::optional<std::uint32_t> predicate_index(std::string_view name) const;
  GroundingStats stats() const;
  /// Human readable form of variable `v` of graph `g`, e.g. `hasAttribute(3, "sunny")`.
  std::string describe_variable(std::size_t g, std::uint32_t v) const;
  /// Variable of graph `g` for `predicate` with the given key arguments
  /// (those after the sample id).
  std::optional<std::uint32_t> find_variable(std::size_t g, std::uint32_t predicate,
                                             const std::vector<Value>& key) const;

  /// Per graph: (predicate, key...) -> variable. Built by ground().
  std::vector<std::unordered_map<std::vector<Value>, std::uint32_t, RowHash>> variable_index;
};

/// Instantiates every rule over the data. The rules are validated first;
/// weights start at 0. Throws DomainExplosion, DomainUnresolvable and the
/// validation errors.
Grounding ground(const std::vector<RuleAst>& rules, const Database& db, const GroundOptions& options = {});

/// Counts what ground() would produce without building factor graphs.
GroundingStats factor_count_report(const std::vector<RuleAst>& rules, const Database& db);

/// The weight key of `rule` under a variable binding. Throws UnboundVariable
/// when the binding does not cover the weight-key variables.
WeightKey weight_key_of(std::uint32_t rule_id, const RuleAst& rule, const std::map<std::string, Value>& binding);

}  // namespace kbc
