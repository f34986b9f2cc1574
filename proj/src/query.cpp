#include "kbc/query.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "parallel.hpp"

namespace kbc {

using lex::Tok;

ConjunctiveQuery parse_query(std::string_view text, const PredicateRegistry& registry) {
  lex::Parser p(lex::tokenize(text));
  ConjunctiveQuery q;
  while (!p.at(Tok::Arrow)) {
    if (p.at(Tok::End)) p.fail("expected '=> answer(...)' to close the query");
    q.literals.push_back(p.literal());
    p.accept(Tok::And);
  }
  if (q.literals.empty()) p.fail("expected at least one literal before '=>'");
  p.expect(Tok::Arrow, "before the answer head");
  const auto head = p.expect(Tok::Ident, "for the answer head");
  if (head.text != "answer")
    throw Error(Errc::SyntaxError, "the query head must be 'answer', found '" + head.text + "'", head.pos.line,
                head.pos.column);
  p.expect(Tok::LParen, "after 'answer'");
  q.answer = p.term_list("to close the answer head");
  p.expect(Tok::End, "after the answer head");

  std::set<std::string> mentioned;
  std::optional<Term> sample_term;
  for (std::size_t i = 0; i < q.literals.size(); ++i) {
    const auto& lit = q.literals[i];
    const auto* pred = registry.find(lit.predicate);
    if (!pred)
      throw Error(Errc::UnknownPredicate, "unknown predicate '" + lit.predicate + "'", lit.pos.line, lit.pos.column);
    if (pred->arity != lit.args.size())
      throw Error(Errc::ArityMismatch,
                  "predicate '" + lit.predicate + "' takes " + std::to_string(pred->arity) + " arguments",
                  lit.pos.line, lit.pos.column);
    for (const auto& a : lit.args)
      if (is_variable(a)) mentioned.insert(variable_name(a));
    if (pred->probabilistic()) {
      q.probabilistic.push_back(i);
      const auto& s = lit.args[*pred->sample_arg];
      if (sample_term && !(*sample_term == s))
        throw Error(Errc::InvalidArgument, "probabilistic literals must all refer to the same sample",
                    lit.pos.line, lit.pos.column);
      sample_term = s;
    } else {
      q.deterministic.push_back(i);
    }
  }
  for (const auto& t : q.answer)
    if (is_variable(t) && !mentioned.count(variable_name(t)))
      throw Error(Errc::UnboundAnswerVariable, "answer variable '" + variable_name(t) + "' appears in no literal");
  return q;
}

std::string format_query(const ConjunctiveQuery& query) {
  std::string out;
  for (const auto& lit : query.literals) out += format_literal(lit) + "\n";
  out += "=> answer(";
  for (std::size_t i = 0; i < query.answer.size(); ++i) out += (i ? ", " : "") + format_term(query.answer[i]);
  return out + ")\n";
}

std::string format_tuple(const std::vector<Value>& tuple) { return "(" + format_constant_list(tuple) + ")"; }

CandidateSet bind_candidates(const ConjunctiveQuery& query, const Database& db) {
  const auto registry = PredicateRegistry::from_database(db);
  BindingPlan plan(query.literals, registry, db);
  CandidateSet out;
  out.variables = plan.variables();
  std::vector<int> head_slots;
  for (const auto& t : query.answer) head_slots.push_back(is_variable(t) ? static_cast<int>(*plan.slot(variable_name(t))) : -1);
  auto slots = plan.make_slots();
  plan.enumerate(slots, [&](const BindingPlan::Slots& s, std::span<const LiteralMatch> m) {
    Candidate c{s, {m.begin(), m.end()}, {}};
    for (std::size_t i = 0; i < query.answer.size(); ++i)
      c.answer.push_back(head_slots[i] >= 0 ? s[head_slots[i]] : std::get<Value>(query.answer[i]));
    out.candidates.push_back(std::move(c));
  });
  return out;
}

namespace {

/// The probabilistic literals of one candidate, resolved to variables of one graph.
struct Resolved {
  std::size_t graph = 0;
  std::vector<LiteralRef> requirements;
};

std::optional<Resolved> resolve(const ConjunctiveQuery& query, const Candidate& c, const KnowledgeBase& kb) {
  if (query.probabilistic.empty()) return std::nullopt;
  Resolved r;
  bool first = true;
  for (auto li : query.probabilistic) {
    const auto& lit = query.literals[li];
    const auto pred = kb.grounding.predicate_index(lit.predicate);
    if (!pred) throw Error(Errc::UnknownFamily, "'" + lit.predicate + "' is not a label predicate of this KB");
    const auto& table = kb.db.table(lit.predicate);
    const auto& row = table.row(static_cast<std::size_t>(c.matches[li].row));
    const auto keys = table.def().key_indices();
    const Value& sample = row[keys[0]];
    auto g = kb.grounding.graph_index(sample);
    if (!g) throw Error(Errc::UnknownSample, "sample " + sample.to_literal() + " has no factor graph");
    if (!first && *g != r.graph)
      throw Error(Errc::InvalidArgument, "candidate spans several samples");
    first = false;
    r.graph = *g;
    std::vector<Value> key;
    for (std::size_t k = 1; k < keys.size(); ++k) key.push_back(row[keys[k]]);
    auto v = kb.grounding.find_variable(*g, *pred, key);
    if (!v) throw Error(Errc::UnknownSample, "no variable for " + format_literal(lit) + " in sample " + sample.to_literal());
    const bool multinomial = kb.grounding.graphs[*g].variable(*v).kind == VariableKind::Multinomial;
    r.requirements.push_back({*v, multinomial ? c.matches[li].category : 1, !lit.negated});
  }
  return r;
}

bool holds(const std::vector<LiteralRef>& reqs, const PossibleWorld& w) {
  for (const auto& r : reqs)
    if ((w.values[r.var] == r.value) != r.positive) return false;
  return true;
}

/// Disjunction of conjunctions over one graph.
WorldIndicator any_of(std::vector<std::vector<LiteralRef>> alternatives) {
  return [alts = std::move(alternatives)](const PossibleWorld& w) {
    for (const auto& a : alts)
      if (holds(a, w)) return true;
    return false;
  };
}

std::vector<double> score(const FactorGraph& g, std::size_t gi, const std::vector<WorldIndicator>& targets,
                          std::span<const double> weights, const SamplerConfig& config, Estimator estimator) {
  if (estimator == Estimator::Exact) {
    std::vector<double> out;
    for (const auto& t : targets) out.push_back(exact_query_marginal(g, t, weights));
    return out;
  }
  std::vector<Target> ts(targets.begin(), targets.end());
  return estimate_marginals(g, ts, weights, config, gi);
}

}  // namespace

double tuple_marginal(const ConjunctiveQuery& query, const Candidate& candidate, const KnowledgeBase& kb,
                      const SamplerConfig& config, Estimator estimator) {
  auto r = resolve(query, candidate, kb);
  if (!r) return 1.0;
  std::vector<WorldIndicator> t = {any_of({r->requirements})};
  return score(kb.grounding.graphs[r->graph], r->graph, t, kb.grounding.weights.values(), config, estimator)[0];
}

std::vector<AnswerTuple> answer(const ConjunctiveQuery& query, const KnowledgeBase& kb, const SamplerConfig& config,
                                std::size_t top_k, Estimator estimator, const std::optional<Value>& only_sample) {
  config.validate();
  const auto cands = bind_candidates(query, kb.db);
  std::optional<std::size_t> only_graph;
  if (only_sample) {
    only_graph = kb.grounding.graph_index(*only_sample);
    if (!only_graph) throw Error(Errc::UnknownSample, "sample " + only_sample->to_literal() + " has no factor graph");
  }
  // tuple -> (certain, graph -> alternatives)
  struct Group {
    bool certain = false;
    std::map<std::size_t, std::vector<std::vector<LiteralRef>>> per_graph;
  };
  std::map<std::vector<Value>, Group> groups;
  for (const auto& c : cands.candidates) {
    auto r = resolve(query, c, kb);
    if (r && only_graph && r->graph != *only_graph) continue;
    auto& grp = groups[c.answer];
    if (!r) grp.certain = true;
    else grp.per_graph[r->graph].push_back(std::move(r->requirements));
  }

  // One chain per graph scores every tuple that touches it.
  std::map<std::size_t, std::vector<std::pair<const std::vector<Value>*, WorldIndicator>>> work;
  for (auto& [tuple, grp] : groups)
    if (!grp.certain)
      for (auto& [g, alts] : grp.per_graph) work[g].emplace_back(&tuple, any_of(std::move(alts)));
  std::vector<std::size_t> graph_ids;
  for (const auto& [g, _] : work) graph_ids.push_back(g);
  std::vector<std::vector<double>> probs(graph_ids.size());
  detail::parallel_for(graph_ids.size(), config.workers, [&](std::size_t i) {
    const auto g = graph_ids[i];
    std::vector<WorldIndicator> targets;
    for (const auto& [_, ind] : work[g]) targets.push_back(ind);
    probs[i] = score(kb.grounding.graphs[g], g, targets, kb.grounding.weights.values(), config, estimator);
  });

  std::map<std::vector<Value>, double> miss;  // product of (1 - p_s)
  for (std::size_t i = 0; i < graph_ids.size(); ++i) {
    const auto& items = work[graph_ids[i]];
    for (std::size_t t = 0; t < items.size(); ++t) {
      auto [it, _] = miss.try_emplace(*items[t].first, 1.0);
      it->second *= 1.0 - probs[i][t];
    }
  }
  std::vector<AnswerTuple> out;
  for (const auto& [tuple, grp] : groups) {
    const double p = grp.certain ? 1.0 : 1.0 - miss.at(tuple);
    out.push_back({tuple, std::clamp(p, 0.0, 1.0)});
  }
  std::sort(out.begin(), out.end(), [](const AnswerTuple& a, const AnswerTuple& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.tuple < b.tuple;
  });
  if (top_k > 0 && out.size() > top_k) out.resize(top_k);
  return out;
}

std::vector<LabelScore> classify(const Value& sample, std::string_view family, const KnowledgeBase& kb,
                                 const SamplerConfig& config, Estimator estimator) {
  const auto g = kb.grounding.graph_index(sample);
  if (!g) throw Error(Errc::UnknownSample, "sample " + sample.to_literal() + " has no factor graph");
  const auto pred = kb.grounding.predicate_index(family);
  const auto& graph = kb.grounding.graphs[*g];
  if (!pred) throw Error(Errc::UnknownFamily, "'" + std::string(family) + "' is not a label predicate");
  std::vector<std::uint32_t> vars;
  for (std::uint32_t v = 0; v < graph.num_variables(); ++v)
    if (graph.variable(v).predicate == *pred) vars.push_back(v);
  if (!vars.empty() && !graph.variable(vars[0]).is_discrete())
    throw Error(Errc::UnknownFamily, "'" + std::string(family) + "' holds continuous evidence, not labels");
  {
    const auto* def = kb.db.schema().find(family);
    if (def && def->role == VariableRole::Continuous)
      throw Error(Errc::UnknownFamily, "'" + std::string(family) + "' holds continuous evidence, not labels");
  }
  const auto marg = estimator == Estimator::Exact
                        ? exact_marginals(graph, kb.grounding.weights.values())
                        : estimate_all_marginals(graph, kb.grounding.weights.values(), config, *g);
  std::vector<LabelScore> out;
  const auto& domain = kb.grounding.domains[*pred];
  for (auto v : vars) {
    const auto& d = graph.variable(v);
    if (d.kind == VariableKind::Boolean) {
      out.push_back({d.key, marg[v][1]});
    } else {
      for (std::int32_t k = 0; k < d.cardinality; ++k) {
        auto label = d.key;
        label.push_back(domain[k]);
        out.push_back({std::move(label), marg[v][k]});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const LabelScore& a, const LabelScore& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.label < b.label;
  });
  return out;
}

}  // namespace kbc
