#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/datastore.hpp"
#include "kbc/error.hpp"
#include "kbc/rulelang.hpp"

namespace kbc {

enum class PredicateKind {
  BooleanLabel,      // probabilistic: Boolean variable table
  MultinomialLabel,  // probabilistic: categorical variable table, last argument is the category
  Continuous,        // evidence: continuous variable table, last argument is the observed value
  Relation,          // deterministic: metadata table, one argument per column
  Builtin,           // deterministic: computed
};

std::string_view kind_name(PredicateKind kind) noexcept;

/// A computed predicate. `solve` receives the argument vector with bound
/// positions filled and returns every full argument tuple that satisfies it.
struct BuiltinPredicate {
  std::vector<bool> needs_bound;
  std::function<std::vector<std::vector<Value>>(const std::vector<std::optional<Value>>& args,
                                                const Database* db)>
      solve;
};

struct Predicate {
  std::string name;
  PredicateKind kind = PredicateKind::Relation;
  std::size_t arity = 0;
  /// Backing table (empty for built-ins).
  std::string table;
  /// Column index of each argument in the backing table.
  std::vector<std::size_t> arg_columns;
  /// Argument position holding the sample id, for variable tables.
  std::optional<std::size_t> sample_arg;
  /// Category labels of a multinomial predicate, sorted; filled when the
  /// registry is built from a database.
  std::vector<Value> domain;
  std::shared_ptr<const BuiltinPredicate> builtin;

  bool probabilistic() const noexcept {
    return kind == PredicateKind::BooleanLabel || kind == PredicateKind::MultinomialLabel;
  }
  bool variable_backed() const noexcept { return probabilistic() || kind == PredicateKind::Continuous; }
  std::optional<std::size_t> domain_index(const Value& label) const;
};

/// Maps predicate names to their table-backed or built-in definitions.
class PredicateRegistry {
 public:
  /// Table-backed predicates for every table in `schema` plus built-ins.
  /// Multinomial domains are left empty.
  static PredicateRegistry from_schema(const Schema& schema);
  /// As above, with multinomial domains read from the data.
  static PredicateRegistry from_database(const Database& db);

  const Predicate* find(std::string_view name) const noexcept;
  const Predicate& at(std::string_view name) const;
  void add(Predicate predicate);
  const std::map<std::string, Predicate, std::less<>>& predicates() const noexcept { return preds_; }

 private:
  std::map<std::string, Predicate, std::less<>> preds_;
};

/// Great-circle distance in km between two "lat,lon" points (haversine on a
/// sphere of radius 6371 km). Throws InvalidArgument on malformed input.
double geo_distance_km(std::string_view latlong1, std::string_view latlong2);
/// Parses radius strings such as "1km" or "20km".
double parse_radius_km(std::string_view radius);

/// nearBy(latlong1, latlong2, "<r>km"): true when the points are within r km.
Predicate make_near_by();
/// hasDate(img, day, month, year): decomposes the `date` column of the
/// `captureDate(image, date)` metadata table ("YYYY-MM-DD"); month is the
/// English month name.
Predicate make_has_date();
inline constexpr std::string_view kCaptureDateTable = "captureDate";

struct ValidationIssue {
  std::size_t rule = 0;
  Errc code = Errc::InvalidArgument;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const noexcept { return issues.empty(); }
  /// Throws the first issue as an Error.
  void throw_if_failed() const;
};

/// Checks predicates, arities, boundness, sample scoping and that every
/// variable has a domain the grounder can enumerate.
ValidationReport validate_rules(const std::vector<RuleAst>& rules, const PredicateRegistry& registry);

}  // namespace kbc
