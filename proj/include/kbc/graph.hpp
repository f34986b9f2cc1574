#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbc/error.hpp"
#include "kbc/value.hpp"

namespace kbc {

enum class VariableKind : std::uint8_t { Boolean, Multinomial, ContinuousEvidence };

inline constexpr std::int32_t kUnobserved = -1;

/// One model variable. Discrete values are stored as indices: Booleans use
/// 0/1, multinomials index into their predicate's sorted domain.
struct VariableDecl {
  VariableKind kind = VariableKind::Boolean;
  std::uint32_t predicate = 0;  // index into Grounding::predicates
  std::vector<Value> key;       // key arguments after the sample id
  std::int32_t cardinality = 2;
  std::int32_t observed = kUnobserved;  // discrete observation
  double evidence = 0.0;                // continuous value

  bool is_discrete() const noexcept { return kind != VariableKind::ContinuousEvidence; }
  bool is_free() const noexcept { return is_discrete() && observed == kUnobserved; }
};

/// Requirement that a discrete variable takes (positive) or avoids (negated)
/// a given value.
struct LiteralRef {
  std::uint32_t var = 0;
  std::int32_t value = 1;
  bool positive = true;

  friend bool operator==(const LiteralRef&, const LiteralRef&) = default;
};

enum class FactorKind : std::uint8_t {
  IndicatorConjunction,  // coefficient if every literal holds, else 0
  LinearFeature,         // indicator times the observed feature value
  Constant,              // no discrete literals: always the coefficient
};

struct FactorInstance {
  std::uint32_t weight = 0;  // index into the weight store
  FactorKind kind = FactorKind::IndicatorConjunction;
  std::uint32_t first = 0;   // first literal in FactorGraph::literal_pool()
  std::uint32_t count = 0;
  std::int32_t feature_var = -1;
  /// Constant factor value, times the feature value for LinearFeature.
  double coefficient = 1.0;

  friend bool operator==(const FactorInstance&, const FactorInstance&) = default;
};

/// A complete assignment: one value index per variable. Entries for
/// continuous variables are ignored.
struct PossibleWorld {
  std::vector<std::int32_t> values;

  friend bool operator==(const PossibleWorld&, const PossibleWorld&) = default;
};

/// The factor graph of one sample. Built incrementally, then `finalize()`d,
/// which freezes it and builds the variable-to-factor adjacency.
class FactorGraph {
 public:
  FactorGraph() = default;
  explicit FactorGraph(Value sample_id) : sample_id_(std::move(sample_id)) {}

  const Value& sample_id() const noexcept { return sample_id_; }

  std::uint32_t add_variable(VariableDecl decl);
  /// Throws InvalidArgument when a literal references an unknown or
  /// non-discrete variable, or the value is out of range.
  std::uint32_t add_factor(std::uint32_t weight, FactorKind kind, std::span<const LiteralRef> literals,
                           std::int32_t feature_var = -1, double scale = 1.0);
  void finalize();
  /// Rewrites every factor's weight index through `mapping`.
  void remap_weights(std::span<const std::uint32_t> mapping);
  bool finalized() const noexcept { return finalized_; }

  std::size_t num_variables() const noexcept { return vars_.size(); }
  std::size_t num_factors() const noexcept { return factors_.size(); }
  const std::vector<VariableDecl>& variables() const noexcept { return vars_; }
  const VariableDecl& variable(std::uint32_t v) const { return vars_[v]; }
  VariableDecl& mutable_variable(std::uint32_t v) { return vars_[v]; }
  const std::vector<FactorInstance>& factors() const noexcept { return factors_; }
  std::span<const LiteralRef> literals(const FactorInstance& f) const noexcept {
    return {pool_.data() + f.first, f.count};
  }
  const std::vector<LiteralRef>& literal_pool() const noexcept { return pool_; }

  /// Factors touching `v` (each listed once), after finalize().
  std::span<const std::uint32_t> markov_blanket(std::uint32_t v) const noexcept {
    return {adj_.data() + adj_offsets_[v], adj_offsets_[v + 1] - adj_offsets_[v]};
  }

  /// Unobserved discrete variables, in index order.
  std::vector<std::uint32_t> free_variables() const;
  std::vector<std::uint32_t> discrete_variables() const;
  std::optional<std::uint32_t> find_variable(std::uint32_t predicate, const std::vector<Value>& key) const;

  /// Observations filled in, free variables at value 0.
  PossibleWorld initial_world() const;
  /// True when the world has the right size, observed variables carry their
  /// observations and discrete values are in range.
  bool consistent(const PossibleWorld& world) const noexcept;

 private:
  Value sample_id_;
  std::vector<VariableDecl> vars_;
  std::vector<FactorInstance> factors_;
  std::vector<LiteralRef> pool_;
  std::vector<std::uint32_t> adj_offsets_;
  std::vector<std::uint32_t> adj_;
  bool finalized_ = false;
};

/// Value of `factor` when the world assigns `values`; literals referring to
/// `override_var` read `override_value` instead.
inline double eval_factor(const FactorGraph& g, const FactorInstance& f, const std::int32_t* values,
                          std::uint32_t override_var = UINT32_MAX, std::int32_t override_value = 0) noexcept {
  const LiteralRef* lit = g.literal_pool().data() + f.first;
  for (std::uint32_t i = 0; i < f.count; ++i, ++lit) {
    const std::int32_t v = lit->var == override_var ? override_value : values[lit->var];
    if ((v == lit->value) != lit->positive) return 0.0;
  }
  return f.coefficient;
}

/// Identifies a tied weight: the rule it came from plus the instantiated
/// weight-key constants. Ordered by rule id, then lexicographically.
struct WeightKey {
  std::uint32_t rule_id = 0;
  std::vector<Value> terms;

  friend bool operator==(const WeightKey&, const WeightKey&) = default;
  friend bool operator<(const WeightKey& a, const WeightKey& b) {
    if (a.rule_id != b.rule_id) return a.rule_id < b.rule_id;
    return a.terms < b.terms;
  }
};

struct WeightKeyHash {
  std::size_t operator()(const WeightKey& k) const noexcept {
    return RowHash{}(k.terms) ^ (static_cast<std::size_t>(k.rule_id) * 0x9e3779b97f4a7c15ULL);
  }
};

/// Weights indexed densely in key order.
class WeightStore {
 public:
  WeightStore() = default;
  /// `keys` must be sorted and unique.
  explicit WeightStore(std::vector<WeightKey> keys, double initial = 0.0);

  std::size_t size() const noexcept { return keys_.size(); }
  const std::vector<WeightKey>& keys() const noexcept { return keys_; }
  const WeightKey& key(std::size_t i) const { return keys_[i]; }
  std::optional<std::size_t> index_of(const WeightKey& key) const;

  double operator[](std::size_t i) const { return values_[i]; }
  /// Throws InvalidArgument for keys not in the store.
  double at(const WeightKey& key) const;
  void set(std::size_t i, double w);
  void set(const WeightKey& key, double w);
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::vector<WeightKey> keys_;
  std::vector<double> values_;
};

/// `rule_id<TAB>key_terms<TAB>weight` lines in key order.
std::string format_weights(const WeightStore& weights);
WeightStore parse_weights(std::string_view text);
/// Assigns weights from `source` to keys present in `target`; returns the
/// number of keys matched.
std::size_t copy_matching_weights(const WeightStore& source, WeightStore& target);

}  // namespace kbc
