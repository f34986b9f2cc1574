#include "kbc/binding.hpp"

#include <algorithm>
#include <set>

namespace kbc {

bool same_value(const Value& a, const Value& b) noexcept {
  if (a == b) return true;
  return a.is_number() && b.is_number() && a.as_number() == b.as_number();
}

BindingPlan::BindingPlan(std::span<const Literal> literals, const PredicateRegistry& registry,
                         const Database& db, std::span<const std::string> prebound)
    : db_(&db) {
  auto slot_of = [&](const std::string& name) {
    auto it = std::find(vars_.begin(), vars_.end(), name);
    if (it != vars_.end()) return static_cast<int>(it - vars_.begin());
    vars_.push_back(name);
    return static_cast<int>(vars_.size() - 1);
  };
  for (const auto& v : prebound) slot_of(v);
  for (const auto& lit : literals) {
    const auto* p = registry.find(lit.predicate);
    if (!p) throw Error(Errc::UnknownPredicate, "unknown predicate '" + lit.predicate + "'", lit.pos.line, lit.pos.column);
    if (p->arity != lit.args.size())
      throw Error(Errc::ArityMismatch,
                  "predicate '" + lit.predicate + "' takes " + std::to_string(p->arity) + " arguments",
                  lit.pos.line, lit.pos.column);
    literal_preds_.push_back(p);
    for (const auto& a : lit.args)
      if (is_variable(a)) slot_of(variable_name(a));
  }

  std::vector<bool> bound(vars_.size(), false);
  for (const auto& v : prebound) bound[*slot(v)] = true;
  std::vector<bool> done(literals.size(), false);

  auto make_step = [&](StepKind kind, std::size_t i) {
    const auto& lit = literals[i];
    const auto* p = literal_preds_[i];
    Step s{kind, i, p, nullptr, {}, {}, true, Access::Scan, {}, std::nullopt};
    if (!p->table.empty()) s.table = &db.table(p->table);
    for (std::size_t a = 0; a < lit.args.size(); ++a) {
      if (is_variable(lit.args[a])) {
        s.arg_slot.push_back(*slot(variable_name(lit.args[a])));
        s.arg_const.emplace_back();
      } else {
        s.arg_slot.push_back(-1);
        Value c = std::get<Value>(lit.args[a]);
        if (s.table) {
          auto conv = coerce(c, s.table->def().columns[p->arg_columns[a]].type);
          if (conv) c = *conv;
          else s.consts_ok = false;
        }
        s.arg_const.push_back(std::move(c));
      }
    }
    if (p->kind == PredicateKind::MultinomialLabel) s.category_arg = lit.args.size() - 1;
    if (s.table) {
      for (auto kc : s.table->def().key_indices()) {
        auto it = std::find(p->arg_columns.begin(), p->arg_columns.end(), kc);
        s.key_args.push_back(static_cast<std::size_t>(it - p->arg_columns.begin()));
      }
      auto is_bound = [&](std::size_t a) { return s.arg_slot[a] < 0 || bound[s.arg_slot[a]]; };
      if (std::all_of(s.key_args.begin(), s.key_args.end(), is_bound)) s.access = Access::KeyLookup;
      else if (p->sample_arg && is_bound(*p->sample_arg)) s.access = Access::SampleIndex;
    }
    return s;
  };
  auto all_bound = [&](std::size_t i, const std::vector<bool>* mask) {
    const auto& lit = literals[i];
    for (std::size_t a = 0; a < lit.args.size(); ++a) {
      if (mask && !(*mask)[a]) continue;
      if (is_variable(lit.args[a]) && !bound[*slot(variable_name(lit.args[a]))]) return false;
    }
    return true;
  };

  std::size_t remaining = literals.size();
  while (remaining > 0) {
    bool placed = false;
    // Filters and built-ins as early as their inputs allow.
    for (std::size_t i = 0; i < literals.size() && !placed; ++i) {
      if (done[i]) continue;
      const auto* p = literal_preds_[i];
      bool filter = literals[i].negated && !p->probabilistic();
      if (filter && all_bound(i, nullptr)) {
        steps_.push_back(make_step(StepKind::Filter, i));
        placed = true;
      } else if (!filter && p->kind == PredicateKind::Builtin && all_bound(i, &p->builtin->needs_bound)) {
        steps_.push_back(make_step(StepKind::Builtin, i));
        placed = true;
      }
      if (placed) done[i] = true;
    }
    if (!placed) {
      int best = -1, best_score = 3;
      for (std::size_t i = 0; i < literals.size(); ++i) {
        if (done[i]) continue;
        const auto* p = literal_preds_[i];
        if (p->kind == PredicateKind::Builtin || (literals[i].negated && !p->probabilistic())) continue;
        auto s = make_step(StepKind::Generate, i);
        int score = s.access == Access::KeyLookup ? 0 : s.access == Access::SampleIndex ? 1 : 2;
        if (score < best_score) best = static_cast<int>(i), best_score = score;
      }
      if (best < 0) {
        for (std::size_t i = 0; i < literals.size(); ++i)
          if (!done[i])
            throw Error(Errc::DomainUnresolvable,
                        "no domain for the variables of '" + format_literal(literals[i]) + "'",
                        literals[i].pos.line, literals[i].pos.column);
      }
      steps_.push_back(make_step(StepKind::Generate, static_cast<std::size_t>(best)));
      done[best] = true;
    }
    --remaining;
    for (auto s : steps_.back().arg_slot)
      if (s >= 0) bound[s] = true;
  }
}

std::optional<std::size_t> BindingPlan::slot(std::string_view name) const noexcept {
  auto it = std::find(vars_.begin(), vars_.end(), name);
  if (it == vars_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - vars_.begin());
}

void BindingPlan::enumerate(Slots& slots, const Callback& cb) const {
  std::vector<LiteralMatch> matches(literal_preds_.size());
  run(0, slots, matches, cb);
}

bool BindingPlan::row_exists(const Step& step, const Slots& slots) const {
  auto arg = [&](std::size_t a) -> const Value& {
    return step.arg_slot[a] >= 0 ? slots[step.arg_slot[a]] : step.arg_const[a];
  };
  if (step.pred->kind == PredicateKind::Builtin) {
    std::vector<std::optional<Value>> args;
    for (std::size_t a = 0; a < step.arg_slot.size(); ++a) args.emplace_back(arg(a));
    return !step.pred->builtin->solve(args, db_).empty();
  }
  if (!step.consts_ok) return false;
  std::vector<Value> key;
  for (auto a : step.key_args) key.push_back(arg(a));
  auto r = step.table->find_key(key);
  if (!r) return false;
  const auto& row = step.table->row(*r);
  for (std::size_t a = 0; a < step.arg_slot.size(); ++a)
    if (!same_value(row[step.pred->arg_columns[a]], arg(a))) return false;
  return true;
}

void BindingPlan::run(std::size_t depth, Slots& slots, std::vector<LiteralMatch>& matches,
                      const Callback& cb) const {
  if (depth == steps_.size()) {
    cb(slots, matches);
    return;
  }
  const Step& step = steps_[depth];
  const auto nargs = step.arg_slot.size();
  auto current = [&](std::size_t a) -> const Value& {
    return step.arg_slot[a] >= 0 ? slots[step.arg_slot[a]] : step.arg_const[a];
  };

  if (step.kind == StepKind::Filter) {
    if (!row_exists(step, slots)) run(depth + 1, slots, matches, cb);
    return;
  }

  std::vector<int> newly;  // slots bound at this depth
  auto unbind = [&] {
    for (int s : newly) slots[s] = Value();
    newly.clear();
  };
  auto try_bind = [&](std::size_t a, const Value& v) {
    const Value& cur = current(a);
    if (!cur.is_null()) return same_value(cur, v);
    slots[step.arg_slot[a]] = v;
    newly.push_back(step.arg_slot[a]);
    return true;
  };

  if (step.kind == StepKind::Builtin) {
    std::vector<std::optional<Value>> args;
    for (std::size_t a = 0; a < nargs; ++a) {
      const Value& v = current(a);
      args.push_back(v.is_null() ? std::nullopt : std::optional<Value>(v));
    }
    for (const auto& tuple : step.pred->builtin->solve(args, db_)) {
      bool ok = true;
      for (std::size_t a = 0; a < nargs && ok; ++a) ok = try_bind(a, tuple[a]);
      if (ok) run(depth + 1, slots, matches, cb);
      unbind();
    }
    return;
  }

  if (!step.consts_ok) return;
  const auto& table = *step.table;
  const auto& cols = step.pred->arg_columns;

  auto visit_row = [&](std::size_t r) {
    const auto& row = table.row(r);
    bool ok = true;
    for (std::size_t a = 0; a < nargs && ok; ++a) {
      if (step.category_arg && a == *step.category_arg) continue;
      const auto& cell = row[cols[a]];
      if (cell.is_null()) ok = false;
      else ok = try_bind(a, cell);
    }
    if (ok) {
      matches[step.literal].row = static_cast<std::int64_t>(r);
      if (!step.category_arg) {
        run(depth + 1, slots, matches, cb);
      } else {
        const auto& domain = step.pred->domain;
        const auto ca = *step.category_arg;
        const Value& fixed = current(ca);
        if (!fixed.is_null()) {
          if (auto idx = step.pred->domain_index(fixed)) {
            matches[step.literal].category = static_cast<std::int32_t>(*idx);
            run(depth + 1, slots, matches, cb);
          }
        } else {
          const int s = step.arg_slot[ca];
          for (std::size_t k = 0; k < domain.size(); ++k) {
            slots[s] = domain[k];
            matches[step.literal].category = static_cast<std::int32_t>(k);
            run(depth + 1, slots, matches, cb);
          }
          slots[s] = Value();
        }
      }
    }
    unbind();
  };

  switch (step.access) {
    case Access::KeyLookup: {
      std::vector<Value> key;
      key.reserve(step.key_args.size());
      for (auto a : step.key_args) key.push_back(current(a));
      if (auto r = table.find_key(key)) visit_row(*r);
      break;
    }
    case Access::SampleIndex:
      for (auto r : table.rows_for_sample(current(*step.pred->sample_arg))) visit_row(r);
      break;
    case Access::Scan:
      for (std::size_t r = 0; r < table.size(); ++r) visit_row(r);
      break;
  }
}

double BindingPlan::projected_count(const Slots& slots) const {
  double total = 1.0;
  for (const auto& step : steps_) {
    if (step.kind != StepKind::Generate) continue;
    double rows = 1.0;
    if (step.access == Access::Scan) {
      rows = static_cast<double>(step.table->size());
    } else if (step.access == Access::SampleIndex) {
      int s = step.arg_slot[*step.pred->sample_arg];
      const Value& v = s >= 0 ? slots[s] : step.arg_const[*step.pred->sample_arg];
      rows = v.is_null() ? static_cast<double>(step.table->size())
                         : static_cast<double>(step.table->rows_for_sample(v).size());
    }
    if (step.category_arg) {
      int s = step.arg_slot[*step.category_arg];
      if (s >= 0 && slots[s].is_null()) rows *= static_cast<double>(std::max<std::size_t>(1, step.pred->domain.size()));
    }
    total *= rows;
  }
  return total;
}

}  // namespace kbc
