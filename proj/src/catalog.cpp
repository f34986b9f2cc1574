#include "kbc/catalog.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include "io_util.hpp"

namespace kbc {

std::string_view kind_name(PredicateKind kind) noexcept {
  switch (kind) {
    case PredicateKind::BooleanLabel: return "boolean";
    case PredicateKind::MultinomialLabel: return "multinomial";
    case PredicateKind::Continuous: return "continuous";
    case PredicateKind::Relation: return "relation";
    case PredicateKind::Builtin: return "builtin";
  }
  return "?";
}

std::optional<std::size_t> Predicate::domain_index(const Value& label) const {
  auto it = std::lower_bound(domain.begin(), domain.end(), label);
  if (it == domain.end() || *it != label) return std::nullopt;
  return static_cast<std::size_t>(it - domain.begin());
}

namespace {

Predicate table_predicate(const TableDef& def) {
  Predicate p;
  p.name = def.name;
  p.table = def.name;
  switch (def.role) {
    case VariableRole::None:
      p.kind = PredicateKind::Relation;
      for (std::size_t c = 0; c < def.columns.size(); ++c) p.arg_columns.push_back(c);
      break;
    case VariableRole::Boolean:
      p.kind = PredicateKind::BooleanLabel;
      p.arg_columns = def.key_indices();
      break;
    case VariableRole::Multinomial:
      p.kind = PredicateKind::MultinomialLabel;
      p.arg_columns = def.key_indices();
      p.arg_columns.push_back(*def.column_index(*def.value_column));
      break;
    case VariableRole::Continuous:
      p.kind = PredicateKind::Continuous;
      p.arg_columns = def.key_indices();
      p.arg_columns.push_back(*def.column_index(*def.value_column));
      break;
  }
  p.arity = p.arg_columns.size();
  if (def.sample_column) {
    auto sc = *def.column_index(*def.sample_column);
    for (std::size_t a = 0; a < p.arg_columns.size(); ++a)
      if (p.arg_columns[a] == sc) p.sample_arg = a;
  }
  return p;
}

}  // namespace

PredicateRegistry PredicateRegistry::from_schema(const Schema& schema) {
  PredicateRegistry reg;
  reg.add(make_near_by());
  if (schema.find(kCaptureDateTable)) reg.add(make_has_date());
  for (const auto& def : schema.tables) reg.add(table_predicate(def));
  return reg;
}

PredicateRegistry PredicateRegistry::from_database(const Database& db) {
  auto reg = from_schema(db.schema());
  for (auto& [name, pred] : reg.preds_) {
    if (pred.kind != PredicateKind::MultinomialLabel) continue;
    const auto& table = db.table(pred.table);
    auto vcol = pred.arg_columns.back();
    std::set<Value> labels;
    const auto vtype = table.def().columns[vcol].type;
    for (const auto& label : table.def().domain) labels.insert(*coerce(label, vtype));
    for (const auto& row : table.rows())
      if (!row[vcol].is_null()) labels.insert(row[vcol]);
    pred.domain.assign(labels.begin(), labels.end());
  }
  return reg;
}

const Predicate* PredicateRegistry::find(std::string_view name) const noexcept {
  auto it = preds_.find(name);
  return it == preds_.end() ? nullptr : &it->second;
}

const Predicate& PredicateRegistry::at(std::string_view name) const {
  if (auto p = find(name)) return *p;
  throw Error(Errc::UnknownPredicate, "unknown predicate '" + std::string(name) + "'");
}

void PredicateRegistry::add(Predicate predicate) {
  auto name = predicate.name;
  preds_.insert_or_assign(std::move(name), std::move(predicate));
}

namespace {

std::pair<double, double> parse_latlong(std::string_view s) {
  auto comma = s.find(',');
  if (comma == std::string_view::npos) comma = s.find(' ');
  if (comma == std::string_view::npos)
    throw Error(Errc::InvalidArgument, "malformed lat,long '" + std::string(s) + "'");
  auto lat = parse_real(detail::trim(s.substr(0, comma)));
  auto lon = parse_real(detail::trim(s.substr(comma + 1)));
  if (!lat || !lon || std::abs(*lat) > 90 || std::abs(*lon) > 180)
    throw Error(Errc::InvalidArgument, "malformed lat,long '" + std::string(s) + "'");
  return {*lat, *lon};
}

}  // namespace

double geo_distance_km(std::string_view latlong1, std::string_view latlong2) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kRad = std::numbers::pi / 180.0;
  auto [lat1, lon1] = parse_latlong(latlong1);
  auto [lat2, lon2] = parse_latlong(latlong2);
  double dlat = (lat2 - lat1) * kRad, dlon = (lon2 - lon1) * kRad;
  double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(lat1 * kRad) * std::cos(lat2 * kRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double parse_radius_km(std::string_view radius) {
  auto r = detail::trim(radius);
  if (r.size() < 3 || r.substr(r.size() - 2) != "km")
    throw Error(Errc::InvalidArgument, "radius must look like '<number>km': '" + std::string(radius) + "'");
  auto v = parse_real(detail::trim(r.substr(0, r.size() - 2)));
  if (!v || *v < 0) throw Error(Errc::InvalidArgument, "bad radius '" + std::string(radius) + "'");
  return *v;
}

Predicate make_near_by() {
  auto b = std::make_shared<BuiltinPredicate>();
  b->needs_bound = {true, true, true};
  b->solve = [](const std::vector<std::optional<Value>>& args, const Database*) {
    std::vector<std::vector<Value>> out;
    for (const auto& a : args)
      if (!a->is_text()) return out;
    if (geo_distance_km(args[0]->as_text(), args[1]->as_text()) <= parse_radius_km(args[2]->as_text()))
      out.push_back({*args[0], *args[1], *args[2]});
    return out;
  };
  Predicate p;
  p.name = "nearBy";
  p.kind = PredicateKind::Builtin;
  p.arity = 3;
  p.builtin = std::move(b);
  return p;
}

Predicate make_has_date() {
  static constexpr std::array<std::string_view, 12> kMonths = {
      "January", "February", "March", "April", "May", "June",
      "July", "August", "September", "October", "November", "December"};
  auto b = std::make_shared<BuiltinPredicate>();
  b->needs_bound = {true, false, false, false};
  b->solve = [](const std::vector<std::optional<Value>>& args, const Database* db) {
    std::vector<std::vector<Value>> out;
    if (!db) return out;
    const auto* table = db->find(kCaptureDateTable);
    if (!table) return out;
    for (const auto& row : select(*table, {{table->def().columns[0].name, *args[0]}})) {
      if (row.size() < 2 || !row[1].is_text()) continue;
      auto parts = detail::split(row[1].as_text(), '-');
      if (parts.size() != 3) continue;
      auto y = parse_integer(parts[0]), m = parse_integer(parts[1]), d = parse_integer(parts[2]);
      if (!y || !m || !d || *m < 1 || *m > 12) continue;
      std::vector<Value> tuple = {*args[0], Value(*d), Value(std::string(kMonths[*m - 1])), Value(*y)};
      bool ok = true;
      for (std::size_t i = 1; i < 4; ++i)
        if (args[i] && !(*args[i] == tuple[i] || (args[i]->is_number() && tuple[i].is_number() &&
                                                   args[i]->as_number() == tuple[i].as_number())))
          ok = false;
      if (ok) out.push_back(std::move(tuple));
    }
    return out;
  };
  Predicate p;
  p.name = "hasDate";
  p.kind = PredicateKind::Builtin;
  p.arity = 4;
  p.builtin = std::move(b);
  return p;
}

void ValidationReport::throw_if_failed() const {
  if (issues.empty()) return;
  const auto& first = issues.front();
  throw Error(first.code, "rule " + std::to_string(first.rule) + ": " + first.message);
}

ValidationReport validate_rules(const std::vector<RuleAst>& rules, const PredicateRegistry& registry) {
  ValidationReport report;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto& rule = rules[r];
    auto issue = [&](Errc code, std::string msg) { report.issues.push_back({r, code, std::move(msg)}); };
    if (rule.key_vars.empty() || rule.body.empty()) {
      issue(Errc::SyntaxError, "rule needs a key variable and a non-empty body");
      continue;
    }
    std::vector<const Predicate*> preds;
    bool resolved = true;
    std::set<std::string> mentioned;
    for (const auto& lit : rule.body) {
      for (const auto& a : lit.args)
        if (is_variable(a)) mentioned.insert(variable_name(a));
      const auto* p = registry.find(lit.predicate);
      if (!p) {
        issue(Errc::UnknownPredicate, "unknown predicate '" + lit.predicate + "'");
        resolved = false;
      } else if (p->arity != lit.args.size()) {
        issue(Errc::ArityMismatch, "predicate '" + lit.predicate + "' takes " + std::to_string(p->arity) +
                                       " arguments, got " + std::to_string(lit.args.size()));
        resolved = false;
      }
      preds.push_back(p);
    }
    auto need = [&](const std::string& name, const char* where) {
      if (!mentioned.count(name)) issue(Errc::UnboundVariable, "variable '" + name + "' in " + where + " is unbound");
    };
    for (const auto& v : rule.key_vars) need(v.name, "the key tuple");
    for (const auto& t : rule.weight_key)
      if (is_variable(t)) need(variable_name(t), "the weight key");
    if (auto* v = std::get_if<Variable>(&rule.factor)) need(v->name, "the factor expression");
    if (!resolved) continue;

    // Domain inference: a fixpoint over generating literals.
    std::set<std::string> generated;
    std::vector<bool> used(rule.body.size(), false);
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t i = 0; i < rule.body.size(); ++i) {
        if (used[i]) continue;
        const auto& lit = rule.body[i];
        const auto* p = preds[i];
        bool generator = false;
        if (p->kind == PredicateKind::Builtin) {
          generator = !lit.negated;
          for (std::size_t a = 0; a < lit.args.size(); ++a)
            if (p->builtin->needs_bound[a] && is_variable(lit.args[a]) && !generated.count(variable_name(lit.args[a])))
              generator = false;
        } else {
          generator = !lit.negated || p->probabilistic();
        }
        if (!generator) continue;
        used[i] = true;
        progress = true;
        for (const auto& a : lit.args)
          if (is_variable(a)) generated.insert(variable_name(a));
      }
    }
    for (const auto& name : mentioned)
      if (!generated.count(name))
        issue(Errc::DomainUnresolvable, "variable '" + name + "' has no enumerable domain");

    const auto& scope = rule.scope_var().name;
    bool has_variable_literal = false;
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
      const auto* p = preds[i];
      if (!p->variable_backed()) continue;
      has_variable_literal = true;
      const auto& sa = rule.body[i].args[*p->sample_arg];
      if (!is_variable(sa) || variable_name(sa) != scope)
        issue(Errc::DomainUnresolvable, "literal '" + format_literal(rule.body[i]) +
                                            "' is not scoped to the sample variable '" + scope + "'");
    }
    if (!has_variable_literal)
      issue(Errc::DomainUnresolvable, "rule has no variable-backed literal to scope sample '" + scope + "'");
    if (auto* fv = std::get_if<Variable>(&rule.factor)) {
      bool feature = false;
      for (std::size_t i = 0; i < rule.body.size(); ++i) {
        const auto& lit = rule.body[i];
        if (preds[i]->kind == PredicateKind::Continuous && !lit.negated && is_variable(lit.args.back()) &&
            variable_name(lit.args.back()) == fv->name)
          feature = true;
      }
      if (!feature)
        issue(Errc::DomainUnresolvable,
              "factor variable '" + fv->name + "' must be the value of a continuous feature literal");
    }
  }
  return report;
}

}  // namespace kbc
