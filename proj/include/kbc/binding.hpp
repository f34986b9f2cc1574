#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/catalog.hpp"
#include "kbc/datastore.hpp"
#include "kbc/rulelang.hpp"

namespace kbc {

/// Where a literal matched in the current binding: the backing row, and for
/// multinomial literals the index of the category in the predicate domain.
struct LiteralMatch {
  std::int64_t row = -1;
  std::int32_t category = -1;
};

/// A join plan over a conjunction of literals. Table-backed literals become
/// generators (hash lookup on the key, per-sample index, or scan), negated
/// deterministic literals become filters, and built-ins run once their
/// inputs are bound. Variables take slots; an unbound slot holds null.
class BindingPlan {
 public:
  using Slots = std::vector<Value>;
  using Callback = std::function<void(const Slots& slots, std::span<const LiteralMatch> matches)>;

  /// `prebound` names variables the caller fixes before enumerating. Throws
  /// UnknownPredicate, ArityMismatch, DomainUnresolvable.
  BindingPlan(std::span<const Literal> literals, const PredicateRegistry& registry, const Database& db,
              std::span<const std::string> prebound = {});

  const std::vector<std::string>& variables() const noexcept { return vars_; }
  std::optional<std::size_t> slot(std::string_view name) const noexcept;
  Slots make_slots() const { return Slots(vars_.size()); }
  const Predicate& predicate(std::size_t literal) const { return *literal_preds_[literal]; }

  /// Calls `cb` once per satisfying binding, in a deterministic order.
  void enumerate(Slots& slots, const Callback& cb) const;
  /// Upper bound on the number of bindings given the prebound slots.
  double projected_count(const Slots& slots) const;

 private:
  enum class StepKind { Generate, Filter, Builtin };
  enum class Access { KeyLookup, SampleIndex, Scan };
  struct Step {
    StepKind kind;
    std::size_t literal;
    const Predicate* pred;
    const DataTable* table;
    std::vector<int> arg_slot;     // -1 for constants
    std::vector<Value> arg_const;  // coerced constants
    bool consts_ok = true;
    Access access = Access::Scan;
    std::vector<std::size_t> key_args;  // argument position of each key column
    std::optional<std::size_t> category_arg;
  };

  void run(std::size_t depth, Slots& slots, std::vector<LiteralMatch>& matches, const Callback& cb) const;
  bool row_exists(const Step& step, const Slots& slots) const;

  std::vector<std::string> vars_;
  std::vector<Step> steps_;
  std::vector<const Predicate*> literal_preds_;
  const Database* db_;
};

/// Equality that treats integer and real values as numbers.
bool same_value(const Value& a, const Value& b) noexcept;

}  // namespace kbc
