#pragma once
// Brute-force references and random fixtures shared by the test binaries.
// The oracle below scores worlds straight from the factor list; it does not
// call any of the library's enumeration or scoring routines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "kbc/graph.hpp"

namespace kbc::testing {

inline double oracle_score(const FactorGraph& g, const std::vector<std::int32_t>& x, std::span<const double> w) {
  double s = 0.0;
  for (const auto& f : g.factors()) {
    bool on = true;
    for (const auto& lit : g.literals(f))
      if ((x[lit.var] == lit.value) != lit.positive) on = false;
    if (on) s += w[f.weight] * f.coefficient;
  }
  return s;
}

/// Every evidence-consistent world with its normalized probability.
struct OracleTable {
  std::vector<std::vector<std::int32_t>> worlds;
  std::vector<double> prob;
  double log_z = 0.0;
};

inline OracleTable oracle_table(const FactorGraph& g, std::span<const double> w) {
  OracleTable t;
  std::vector<std::uint32_t> free;
  std::vector<std::int32_t> x(g.num_variables(), 0);
  for (std::uint32_t v = 0; v < g.num_variables(); ++v) {
    const auto& d = g.variable(v);
    if (!d.is_discrete()) continue;
    if (d.observed >= 0) x[v] = d.observed;
    else free.push_back(v);
  }
  std::vector<double> scores;
  while (true) {
    t.worlds.push_back(x);
    scores.push_back(oracle_score(g, x, w));
    std::size_t i = 0;
    for (; i < free.size(); ++i) {
      if (++x[free[i]] < g.variable(free[i]).cardinality) break;
      x[free[i]] = 0;
    }
    if (i == free.size()) break;
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  t.log_z = m + std::log(z);
  for (double s : scores) t.prob.push_back(std::exp(s - t.log_z));
  return t;
}

inline std::vector<std::vector<double>> oracle_marginals(const FactorGraph& g, std::span<const double> w) {
  const auto t = oracle_table(g, w);
  std::vector<std::vector<double>> out(g.num_variables());
  for (std::uint32_t v = 0; v < g.num_variables(); ++v)
    if (g.variable(v).is_discrete()) out[v].assign(g.variable(v).cardinality, 0.0);
  for (std::size_t i = 0; i < t.worlds.size(); ++i)
    for (std::uint32_t v = 0; v < g.num_variables(); ++v)
      if (g.variable(v).is_discrete()) out[v][t.worlds[i][v]] += t.prob[i];
  return out;
}

template <class Pred>
double oracle_probability(const FactorGraph& g, std::span<const double> w, Pred&& holds) {
  const auto t = oracle_table(g, w);
  double p = 0.0;
  for (std::size_t i = 0; i < t.worlds.size(); ++i)
    if (holds(t.worlds[i])) p += t.prob[i];
  return p;
}

/// Pr[v = k | all other values of x] from full-world scores.
inline std::vector<double> oracle_conditional(const FactorGraph& g, std::uint32_t v, std::vector<std::int32_t> x,
                                              std::span<const double> w) {
  const auto k = g.variable(v).cardinality;
  std::vector<double> s(k);
  for (std::int32_t i = 0; i < k; ++i) {
    x[v] = i;
    s[i] = oracle_score(g, x, w);
  }
  const double m = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (auto& e : s) z += (e = std::exp(e - m));
  for (auto& e : s) e /= z;
  return s;
}

/// E[sum of feature values per weight index].
inline std::vector<double> oracle_expectations(const FactorGraph& g, std::span<const double> w) {
  const auto t = oracle_table(g, w);
  std::vector<double> e(w.size(), 0.0);
  for (std::size_t i = 0; i < t.worlds.size(); ++i)
    for (const auto& f : g.factors()) {
      bool on = true;
      for (const auto& lit : g.literals(f))
        if ((t.worlds[i][lit.var] == lit.value) != lit.positive) on = false;
      if (on) e[f.weight] += t.prob[i] * f.coefficient;
    }
  return e;
}

struct RandomGraphSpec {
  std::size_t free_vars = 8;
  std::size_t observed_vars = 0;
  /// Chance that a discrete variable is multinomial (cardinality 3 or 4).
  double multinomial = 0.0;
  std::size_t features = 0;
  /// Factors per discrete variable beyond the unary ones.
  double pairwise = 1.5;
  /// Probability a literal is negated.
  double negation = 0.3;
  std::size_t max_literals = 2;
  double weight_range = 2.0;
  /// Distinct weights; 0 gives every factor its own.
  std::size_t tied = 0;
};

struct RandomModel {
  FactorGraph graph;
  std::vector<double> weights;
};

inline RandomModel random_model(std::mt19937_64& rng, const RandomGraphSpec& spec) {
  RandomModel m;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(-spec.weight_range, spec.weight_range);
  const std::size_t n = spec.free_vars + spec.observed_vars;
  std::vector<std::uint32_t> discrete;
  for (std::size_t i = 0; i < n; ++i) {
    VariableDecl d;
    if (unit(rng) < spec.multinomial) {
      d.kind = VariableKind::Multinomial;
      d.cardinality = 3 + static_cast<std::int32_t>(rng() % 2);
    }
    if (i >= spec.free_vars) d.observed = static_cast<std::int32_t>(rng() % d.cardinality);
    d.key = {Value(static_cast<std::int64_t>(i))};
    discrete.push_back(m.graph.add_variable(d));
  }
  std::vector<std::uint32_t> feats;
  for (std::size_t i = 0; i < spec.features; ++i) {
    VariableDecl d;
    d.kind = VariableKind::ContinuousEvidence;
    d.evidence = wdist(rng) / std::max(1.0, spec.weight_range);
    d.key = {Value(static_cast<std::int64_t>(n + i))};
    feats.push_back(m.graph.add_variable(d));
  }
  std::size_t next_weight = 0;
  auto pick_weight = [&] {
    if (spec.tied) return static_cast<std::uint32_t>(rng() % spec.tied);
    return static_cast<std::uint32_t>(next_weight++);
  };
  auto literal = [&](std::uint32_t v) {
    const auto& d = m.graph.variable(v);
    LiteralRef l;
    l.var = v;
    l.value = static_cast<std::int32_t>(rng() % d.cardinality);
    l.positive = unit(rng) >= spec.negation;
    return l;
  };
  for (auto v : discrete) {
    LiteralRef l = literal(v);
    if (!feats.empty() && unit(rng) < 0.5)
      m.graph.add_factor(pick_weight(), FactorKind::LinearFeature, std::span(&l, 1),
                         static_cast<std::int32_t>(feats[rng() % feats.size()]));
    else
      m.graph.add_factor(pick_weight(), FactorKind::IndicatorConjunction, std::span(&l, 1));
  }
  const auto extra = static_cast<std::size_t>(spec.pairwise * static_cast<double>(n));
  for (std::size_t f = 0; f < extra && n > 1; ++f) {
    const std::size_t arity = 2 + (spec.max_literals > 2 ? rng() % (spec.max_literals - 1) : 0);
    std::vector<LiteralRef> lits;
    for (std::size_t a = 0; a < arity; ++a) lits.push_back(literal(discrete[rng() % n]));
    m.graph.add_factor(pick_weight(), FactorKind::IndicatorConjunction, lits);
  }
  m.graph.finalize();
  const std::size_t nw = spec.tied ? spec.tied : next_weight;
  for (std::size_t i = 0; i < nw; ++i) m.weights.push_back(wdist(rng));
  return m;
}

/// A random evidence-consistent world.
inline PossibleWorld random_world(std::mt19937_64& rng, const FactorGraph& g) {
  PossibleWorld w = g.initial_world();
  for (auto v : g.free_variables()) w.values[v] = static_cast<std::int32_t>(rng() % g.variable(v).cardinality);
  return w;
}

inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace kbc::testing
