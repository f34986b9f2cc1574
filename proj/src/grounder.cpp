#include "kbc/grounder.hpp"

#include <algorithm>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "kbc/binding.hpp"

namespace kbc {

std::optional<std::size_t> Grounding::graph_index(const Value& sample) const {
  auto it = std::lower_bound(graphs.begin(), graphs.end(), sample,
                             [](const FactorGraph& g, const Value& s) { return g.sample_id() < s; });
  if (it == graphs.end() || it->sample_id() != sample) return std::nullopt;
  return static_cast<std::size_t>(it - graphs.begin());
}

std::optional<std::uint32_t> Grounding::predicate_index(std::string_view name) const {
  for (std::uint32_t i = 0; i < predicates.size(); ++i)
    if (predicates[i] == name) return i;
  return std::nullopt;
}

GroundingStats Grounding::stats() const {
  GroundingStats s;
  for (const auto& g : graphs) {
    s.n_variables += g.num_variables();
    s.n_factors += g.num_factors();
  }
  s.n_parameters = weights.size();
  return s;
}

std::string Grounding::describe_variable(std::size_t g, std::uint32_t v) const {
  const auto& graph = graphs.at(g);
  const auto& d = graph.variable(v);
  std::string out = predicates.at(d.predicate) + "(" + graph.sample_id().to_literal();
  for (const auto& k : d.key) out += ", " + k.to_literal();
  return out + ")";
}

std::optional<std::uint32_t> Grounding::find_variable(std::size_t g, std::uint32_t predicate,
                                                     const std::vector<Value>& key) const {
  if (g >= variable_index.size()) return std::nullopt;
  std::vector<Value> k;
  k.reserve(key.size() + 1);
  k.emplace_back(static_cast<std::int64_t>(predicate));
  k.insert(k.end(), key.begin(), key.end());
  auto it = variable_index[g].find(k);
  if (it == variable_index[g].end()) return std::nullopt;
  return it->second;
}

WeightKey weight_key_of(std::uint32_t rule_id, const RuleAst& rule, const std::map<std::string, Value>& binding) {
  WeightKey key{rule_id, {}};
  for (const auto& t : rule.weight_key) {
    if (!is_variable(t)) {
      key.terms.push_back(std::get<Value>(t));
      continue;
    }
    auto it = binding.find(variable_name(t));
    if (it == binding.end())
      throw Error(Errc::UnboundVariable, "binding does not cover weight-key variable '" + variable_name(t) + "'");
    key.terms.push_back(it->second);
  }
  return key;
}

namespace {

struct VariableTable {
  const DataTable* table = nullptr;
  std::uint32_t predicate = 0;
  VariableKind kind = VariableKind::Boolean;
  std::vector<std::uint32_t> row_var;  // row -> variable index within its sample's graph
};

/// Precomputed per-rule information shared by counting and materializing.
struct RulePlan {
  BindingPlan plan;
  std::size_t scope_slot;
  std::vector<int> key_slots;  // -1 for constant weight-key terms
  std::vector<Value> key_consts;
  struct Ref {
    std::size_t literal;
    std::size_t vtable;
    bool positive;
    bool multinomial;
  };
  std::vector<Ref> refs;
  std::optional<std::pair<std::size_t, std::size_t>> feature;  // (literal, vtable)
  double scale = 1.0;
  FactorKind kind = FactorKind::IndicatorConjunction;
};

class Grounder {
 public:
  Grounder(const std::vector<RuleAst>& rules, const Database& db) : rules_(rules), db_(db) {
    registry_ = PredicateRegistry::from_database(db);
    validate_rules(rules, registry_).throw_if_failed();

    for (const auto& def : db.schema().tables) {
      if (def.role == VariableRole::None) continue;
      VariableTable vt;
      vt.table = &db.table(def.name);
      vt.predicate = static_cast<std::uint32_t>(predicates_.size());
      vt.kind = def.role == VariableRole::Boolean       ? VariableKind::Boolean
                : def.role == VariableRole::Multinomial ? VariableKind::Multinomial
                                                        : VariableKind::ContinuousEvidence;
      predicates_.push_back(def.name);
      domains_.push_back(registry_.at(def.name).domain);
      std::size_t id = vtables_.size();
      vtable_by_name_[def.name] = id;
      vtables_.push_back(std::move(vt));
    }
    std::set<Value> samples;
    for (const auto& vt : vtables_)
      for (const auto& s : vt.table->samples()) samples.insert(s);
    samples_.assign(samples.begin(), samples.end());

    for (std::uint32_t r = 0; r < rules.size(); ++r) plans_.push_back(make_plan(r));
  }

  const std::vector<Value>& samples() const { return samples_; }

  std::size_t total_variables() const {
    std::size_t n = 0;
    for (const auto& vt : vtables_) n += vt.table->size();
    return n;
  }

  double projected_factors() const {
    double total = 0;
    for (const auto& rp : plans_) {
      auto slots = rp.plan.make_slots();
      for (const auto& s : samples_) {
        slots[rp.scope_slot] = s;
        total += rp.plan.projected_count(slots);
      }
    }
    return total;
  }

  FactorGraph build_variables(const Value& sample) {
    FactorGraph g(sample);
    for (auto& vt : vtables_) {
      const auto& def = vt.table->def();
      const auto keys = def.key_indices();
      const auto vcol = *def.column_index(*def.value_column);
      const auto& domain = domains_[vt.predicate];
      for (auto r : vt.table->rows_for_sample(sample)) {
        const auto& row = vt.table->row(r);
        VariableDecl d;
        d.kind = vt.kind;
        d.predicate = vt.predicate;
        for (std::size_t k = 1; k < keys.size(); ++k) d.key.push_back(row[keys[k]]);
        const auto& cell = row[vcol];
        switch (vt.kind) {
          case VariableKind::Boolean:
            d.cardinality = 2;
            if (!cell.is_null()) d.observed = cell.as_boolean() ? 1 : 0;
            break;
          case VariableKind::Multinomial:
            d.cardinality = static_cast<std::int32_t>(domain.size());
            if (!cell.is_null())
              d.observed = static_cast<std::int32_t>(std::lower_bound(domain.begin(), domain.end(), cell) - domain.begin());
            break;
          case VariableKind::ContinuousEvidence:
            if (cell.is_null())
              throw Error(Errc::TypeMismatch,
                          "table '" + def.name + "' row " + std::to_string(r) + ": continuous evidence is null", r);
            d.evidence = cell.as_real();
            break;
        }
        if (vt.kind == VariableKind::Multinomial && d.cardinality == 0) continue;
        vt.row_var.resize(vt.table->size(), UINT32_MAX);
        vt.row_var[r] = g.add_variable(std::move(d));
      }
    }
    return g;
  }

  /// Enumerates every binding of every rule scoped to `sample`.
  template <class Sink>
  void enumerate(const Value& sample, Sink&& sink) const {
    for (std::uint32_t r = 0; r < plans_.size(); ++r) {
      const auto& rp = plans_[r];
      auto slots = rp.plan.make_slots();
      slots[rp.scope_slot] = sample;
      rp.plan.enumerate(slots, [&](const BindingPlan::Slots& s, std::span<const LiteralMatch> m) { sink(r, rp, s, m); });
    }
  }

  static WeightKey key_for(std::uint32_t r, const RulePlan& rp, const BindingPlan::Slots& slots) {
    WeightKey key{r, {}};
    key.terms.reserve(rp.key_slots.size());
    for (std::size_t i = 0; i < rp.key_slots.size(); ++i)
      key.terms.push_back(rp.key_slots[i] >= 0 ? slots[rp.key_slots[i]] : rp.key_consts[i]);
    return key;
  }

  const std::vector<VariableTable>& vtables() const { return vtables_; }
  std::vector<std::string> predicates_;
  std::vector<std::vector<Value>> domains_;

 private:
  RulePlan make_plan(std::uint32_t r) {
    const auto& rule = rules_[r];
    std::vector<std::string> pre = {rule.scope_var().name};
    RulePlan rp{BindingPlan(rule.body, registry_, db_, pre), 0, {}, {}, {}, std::nullopt, 1.0,
                FactorKind::IndicatorConjunction};
    rp.scope_slot = *rp.plan.slot(rule.scope_var().name);
    for (const auto& t : rule.weight_key) {
      if (is_variable(t)) {
        rp.key_slots.push_back(static_cast<int>(*rp.plan.slot(variable_name(t))));
        rp.key_consts.emplace_back();
      } else {
        rp.key_slots.push_back(-1);
        rp.key_consts.push_back(std::get<Value>(t));
      }
    }
    const auto* fvar = std::get_if<Variable>(&rule.factor);
    for (std::size_t i = 0; i < rule.body.size(); ++i) {
      const auto& lit = rule.body[i];
      const auto& pred = rp.plan.predicate(i);
      if (pred.probabilistic()) {
        rp.refs.push_back({i, vtable_by_name_.at(pred.name), !lit.negated,
                           pred.kind == PredicateKind::MultinomialLabel});
      } else if (pred.kind == PredicateKind::Continuous && fvar && !lit.negated && !rp.feature &&
                 is_variable(lit.args.back()) && variable_name(lit.args.back()) == fvar->name) {
        rp.feature = std::make_pair(i, vtable_by_name_.at(pred.name));
      }
    }
    if (fvar) rp.kind = FactorKind::LinearFeature;
    else if (rp.refs.empty()) rp.kind = FactorKind::Constant;
    if (auto* c = std::get_if<double>(&rule.factor)) rp.scale = *c;
    return rp;
  }

  const std::vector<RuleAst>& rules_;
  const Database& db_;
  PredicateRegistry registry_;
  std::vector<VariableTable> vtables_;
  std::unordered_map<std::string, std::size_t> vtable_by_name_;
  std::vector<Value> samples_;
  std::vector<RulePlan> plans_;
};

struct PartialGrounding {
  std::vector<FactorGraph> graphs;
  std::vector<WeightKey> keys;  // local key id -> key
};

}  // namespace

Grounding ground(const std::vector<RuleAst>& rules, const Database& db, const GroundOptions& options) {
  Grounder grounder(rules, db);
  const auto projected = grounder.projected_factors();
  if (projected > options.max_factors)
    throw Error(Errc::DomainExplosion, "projected factor count " + std::to_string(projected) + " exceeds cap " +
                                           std::to_string(options.max_factors));

  const auto& samples = grounder.samples();
  // Variables first, serially: the row -> variable maps are shared state.
  std::vector<FactorGraph> graphs;
  graphs.reserve(samples.size());
  for (const auto& s : samples) graphs.push_back(grounder.build_variables(s));

  const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(samples.size())));
  std::vector<PartialGrounding> parts(workers);
  auto work = [&](unsigned w) {
    std::unordered_map<WeightKey, std::uint32_t, WeightKeyHash> local;
    auto& part = parts[w];
    std::vector<LiteralRef> refs;
    const std::size_t begin = samples.size() * w / workers, end = samples.size() * (w + 1) / workers;
    for (std::size_t gi = begin; gi < end; ++gi) {
      auto& g = graphs[gi];
      grounder.enumerate(samples[gi], [&](std::uint32_t r, const RulePlan& rp, const BindingPlan::Slots& slots,
                                          std::span<const LiteralMatch> m) {
        auto key = Grounder::key_for(r, rp, slots);
        auto [it, fresh] = local.try_emplace(std::move(key), static_cast<std::uint32_t>(part.keys.size()));
        if (fresh) part.keys.push_back(it->first);
        refs.clear();
        for (const auto& ref : rp.refs) {
          const auto& vt = grounder.vtables()[ref.vtable];
          LiteralRef lr;
          lr.var = vt.row_var[m[ref.literal].row];
          lr.value = ref.multinomial ? m[ref.literal].category : 1;
          lr.positive = ref.positive;
          refs.push_back(lr);
        }
        std::int32_t feature = -1;
        if (rp.feature)
          feature = static_cast<std::int32_t>(grounder.vtables()[rp.feature->second].row_var[m[rp.feature->first].row]);
        g.add_factor(it->second, rp.kind, refs, feature, rp.scale);
      });
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }

  // Deterministic key order regardless of the partitioning.
  std::vector<WeightKey> all;
  for (const auto& p : parts) all.insert(all.end(), p.keys.begin(), p.keys.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  Grounding out;
  for (unsigned w = 0; w < workers; ++w) {
    std::vector<std::uint32_t> mapping(parts[w].keys.size());
    for (std::size_t i = 0; i < mapping.size(); ++i)
      mapping[i] = static_cast<std::uint32_t>(std::lower_bound(all.begin(), all.end(), parts[w].keys[i]) - all.begin());
    const std::size_t begin = samples.size() * w / workers, end = samples.size() * (w + 1) / workers;
    for (std::size_t gi = begin; gi < end; ++gi) graphs[gi].remap_weights(mapping);
  }
  for (auto& g : graphs) g.finalize();
  out.predicates = grounder.predicates_;
  out.domains = grounder.domains_;
  out.graphs = std::move(graphs);
  for (const auto& g : out.graphs) {
    auto& index = out.variable_index.emplace_back();
    for (std::uint32_t v = 0; v < g.num_variables(); ++v) {
      const auto& d = g.variable(v);
      std::vector<Value> k;
      k.emplace_back(static_cast<std::int64_t>(d.predicate));
      k.insert(k.end(), d.key.begin(), d.key.end());
      index.emplace(std::move(k), v);
    }
  }
  out.weights = WeightStore(std::move(all), 0.0);
  return out;
}

GroundingStats factor_count_report(const std::vector<RuleAst>& rules, const Database& db) {
  Grounder grounder(rules, db);
  GroundingStats stats;
  stats.n_variables = grounder.total_variables();
  std::unordered_set<WeightKey, WeightKeyHash> keys;
  for (const auto& s : grounder.samples()) {
    grounder.enumerate(s, [&](std::uint32_t r, const RulePlan& rp, const BindingPlan::Slots& slots,
                              std::span<const LiteralMatch>) {
      ++stats.n_factors;
      keys.insert(Grounder::key_for(r, rp, slots));
    });
  }
  stats.n_parameters = keys.size();
  return stats;
}

}  // namespace kbc
