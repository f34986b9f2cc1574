#include "kbc/graph.hpp"

#include <algorithm>
#include <cmath>

#include "io_util.hpp"
#include "kbc/rulelang.hpp"

namespace kbc {

std::uint32_t FactorGraph::add_variable(VariableDecl decl) {
  if (finalized_) throw Error(Errc::InvalidArgument, "graph already finalized");
  if (decl.kind == VariableKind::ContinuousEvidence) decl.cardinality = 0;
  if (decl.kind == VariableKind::Boolean) decl.cardinality = 2;
  if (decl.is_discrete() && decl.cardinality < 1)
    throw Error(Errc::InvalidArgument, "discrete variable needs a non-empty domain");
  if (decl.is_discrete() && decl.observed != kUnobserved &&
      (decl.observed < 0 || decl.observed >= decl.cardinality))
    throw Error(Errc::InvalidArgument, "observed value outside the variable domain");
  vars_.push_back(std::move(decl));
  return static_cast<std::uint32_t>(vars_.size() - 1);
}

std::uint32_t FactorGraph::add_factor(std::uint32_t weight, FactorKind kind, std::span<const LiteralRef> literals,
                                      std::int32_t feature_var, double scale) {
  if (finalized_) throw Error(Errc::InvalidArgument, "graph already finalized");
  FactorInstance f;
  f.weight = weight;
  f.kind = kind;
  f.first = static_cast<std::uint32_t>(pool_.size());
  f.count = static_cast<std::uint32_t>(literals.size());
  f.feature_var = feature_var;
  f.coefficient = scale;
  for (const auto& lit : literals) {
    if (lit.var >= vars_.size() || !vars_[lit.var].is_discrete())
      throw Error(Errc::InvalidArgument, "factor literal must reference a discrete variable of this graph");
    if (lit.value < 0 || lit.value >= vars_[lit.var].cardinality)
      throw Error(Errc::InvalidArgument, "factor literal value outside the variable domain");
  }
  if (kind == FactorKind::LinearFeature) {
    if (feature_var < 0 || static_cast<std::size_t>(feature_var) >= vars_.size() ||
        vars_[feature_var].kind != VariableKind::ContinuousEvidence)
      throw Error(Errc::InvalidArgument, "linear factor needs exactly one continuous feature variable");
    f.coefficient = scale * vars_[feature_var].evidence;
  }
  pool_.insert(pool_.end(), literals.begin(), literals.end());
  factors_.push_back(f);
  return static_cast<std::uint32_t>(factors_.size() - 1);
}

void FactorGraph::finalize() {
  if (finalized_) return;
  std::vector<std::uint32_t> degree(vars_.size() + 1, 0);
  std::vector<std::uint32_t> last_seen(vars_.size(), UINT32_MAX);
  for (std::uint32_t fi = 0; fi < factors_.size(); ++fi)
    for (const auto& lit : literals(factors_[fi]))
      if (last_seen[lit.var] != fi) last_seen[lit.var] = fi, ++degree[lit.var];
  adj_offsets_.assign(vars_.size() + 1, 0);
  for (std::size_t v = 0; v < vars_.size(); ++v) adj_offsets_[v + 1] = adj_offsets_[v] + degree[v];
  adj_.assign(adj_offsets_.back(), 0);
  std::vector<std::uint32_t> fill(adj_offsets_.begin(), adj_offsets_.end() - 1);
  std::fill(last_seen.begin(), last_seen.end(), UINT32_MAX);
  for (std::uint32_t fi = 0; fi < factors_.size(); ++fi)
    for (const auto& lit : literals(factors_[fi]))
      if (last_seen[lit.var] != fi) last_seen[lit.var] = fi, adj_[fill[lit.var]++] = fi;
  finalized_ = true;
}

void FactorGraph::remap_weights(std::span<const std::uint32_t> mapping) {
  for (auto& f : factors_) f.weight = mapping[f.weight];
}

std::vector<std::uint32_t> FactorGraph::free_variables() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < vars_.size(); ++v)
    if (vars_[v].is_free()) out.push_back(v);
  return out;
}

std::vector<std::uint32_t> FactorGraph::discrete_variables() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < vars_.size(); ++v)
    if (vars_[v].is_discrete()) out.push_back(v);
  return out;
}

std::optional<std::uint32_t> FactorGraph::find_variable(std::uint32_t predicate, const std::vector<Value>& key) const {
  for (std::uint32_t v = 0; v < vars_.size(); ++v)
    if (vars_[v].predicate == predicate && vars_[v].key == key) return v;
  return std::nullopt;
}

PossibleWorld FactorGraph::initial_world() const {
  PossibleWorld w;
  w.values.resize(vars_.size(), 0);
  for (std::size_t v = 0; v < vars_.size(); ++v)
    if (vars_[v].is_discrete() && vars_[v].observed != kUnobserved) w.values[v] = vars_[v].observed;
  return w;
}

bool FactorGraph::consistent(const PossibleWorld& world) const noexcept {
  if (world.values.size() != vars_.size()) return false;
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    const auto& d = vars_[v];
    if (!d.is_discrete()) continue;
    if (world.values[v] < 0 || world.values[v] >= d.cardinality) return false;
    if (d.observed != kUnobserved && world.values[v] != d.observed) return false;
  }
  return true;
}

WeightStore::WeightStore(std::vector<WeightKey> keys, double initial)
    : keys_(std::move(keys)), values_(keys_.size(), initial) {
  for (std::size_t i = 1; i < keys_.size(); ++i)
    if (!(keys_[i - 1] < keys_[i])) throw Error(Errc::InvalidArgument, "weight keys must be sorted and unique");
}

std::optional<std::size_t> WeightStore::index_of(const WeightKey& key) const {
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || !(*it == key)) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

double WeightStore::at(const WeightKey& key) const {
  if (auto i = index_of(key)) return values_[*i];
  throw Error(Errc::InvalidArgument, "no weight for key of rule " + std::to_string(key.rule_id));
}

void WeightStore::set(std::size_t i, double w) {
  if (!std::isfinite(w)) throw Error(Errc::NonFiniteWeight, "weight " + std::to_string(i) + " is not finite");
  values_.at(i) = w;
}

void WeightStore::set(const WeightKey& key, double w) {
  auto i = index_of(key);
  if (!i) throw Error(Errc::InvalidArgument, "no weight for key of rule " + std::to_string(key.rule_id));
  set(*i, w);
}

std::string format_weights(const WeightStore& weights) {
  std::string out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& k = weights.key(i);
    out += std::to_string(k.rule_id);
    out += '\t';
    out += format_constant_list(k.terms);
    out += '\t';
    out += format_real(weights[i]);
    out += '\n';
  }
  return out;
}

WeightStore parse_weights(std::string_view text) {
  std::vector<std::pair<WeightKey, double>> entries;
  std::size_t line_no = 0;
  for (auto line : detail::split(text, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line, '\t');
    if (fields.size() != 3) throw Error(Errc::SyntaxError, "weights line needs 3 tab-separated fields", line_no);
    auto rule = parse_integer(fields[0]);
    auto w = parse_real(detail::trim(fields[2]));
    if (!rule || *rule < 0) throw Error(Errc::SyntaxError, "bad rule id", line_no);
    if (!w || !std::isfinite(*w)) throw Error(Errc::NonFiniteWeight, "bad weight value", line_no);
    entries.push_back({WeightKey{static_cast<std::uint32_t>(*rule), parse_constant_list(fields[1])}, *w});
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<WeightKey> keys;
  for (const auto& e : entries) keys.push_back(e.first);
  WeightStore store(std::move(keys));
  for (std::size_t i = 0; i < entries.size(); ++i) store.set(i, entries[i].second);
  return store;
}

std::size_t copy_matching_weights(const WeightStore& source, WeightStore& target) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (auto j = target.index_of(source.key(i))) {
      target.set(*j, source[i]);
      ++n;
    }
  }
  return n;
}

}  // namespace kbc
