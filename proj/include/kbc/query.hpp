#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/binding.hpp"
#include "kbc/catalog.hpp"
#include "kbc/kb.hpp"
#include "kbc/rulelang.hpp"
#include "kbc/sampler.hpp"

namespace kbc {

/// A conjunction of literals with an answer head. Head terms are usually
/// variables but may be constants, which are echoed into every answer.
struct ConjunctiveQuery {
  std::vector<Literal> literals;
  std::vector<Term> answer;
  /// Indices into `literals`.
  std::vector<std::size_t> probabilistic;
  std::vector<std::size_t> deterministic;
};

/// One literal per line (a trailing `&` or `∧` is allowed), `#` comments,
/// closed by `=> answer(terms)`. Throws SyntaxError, UnknownPredicate,
/// ArityMismatch, UnboundAnswerVariable, and InvalidArgument when the
/// probabilistic literals do not share one sample argument.
ConjunctiveQuery parse_query(std::string_view text, const PredicateRegistry& registry);
std::string format_query(const ConjunctiveQuery& query);

/// A satisfying binding of the query body. `matches` locate each literal in
/// its table; probabilistic literals only assert that the variable exists,
/// their truth is left to inference.
struct Candidate {
  std::vector<Value> slots;
  std::vector<LiteralMatch> matches;
  std::vector<Value> answer;
};

struct CandidateSet {
  std::vector<std::string> variables;
  std::vector<Candidate> candidates;
};

/// Joins the deterministic literals and the domains of the probabilistic
/// ones. Throws DomainUnresolvable.
CandidateSet bind_candidates(const ConjunctiveQuery& query, const Database& db);

enum class Estimator { Gibbs, Exact };

/// Probability that every probabilistic literal of the query holds under
/// `candidate`. Throws UnknownSample.
double tuple_marginal(const ConjunctiveQuery& query, const Candidate& candidate, const KnowledgeBase& kb,
                      const SamplerConfig& config, Estimator estimator = Estimator::Gibbs);

struct AnswerTuple {
  std::vector<Value> tuple;
  double probability = 0.0;
};

/// Candidates grouped by answer tuple, scored, sorted by probability
/// descending with ties broken by the tuple, truncated to `top_k` (0 keeps
/// all). Several bindings of one tuple within a sample are combined as a
/// disjunction inside one chain; independent samples combine as
/// 1 - prod(1 - p). With `only_sample`, candidates whose probabilistic
/// literals lie in other samples are dropped (deterministic-only candidates
/// are kept).
std::vector<AnswerTuple> answer(const ConjunctiveQuery& query, const KnowledgeBase& kb, const SamplerConfig& config,
                                std::size_t top_k = 10, Estimator estimator = Estimator::Gibbs,
                                const std::optional<Value>& only_sample = std::nullopt);

struct LabelScore {
  std::vector<Value> label;
  double probability = 0.0;
};

/// Marginals of every label of `family` (a label predicate) for one sample,
/// sorted descending. Throws UnknownSample, UnknownFamily.
std::vector<LabelScore> classify(const Value& sample, std::string_view family, const KnowledgeBase& kb,
                                 const SamplerConfig& config, Estimator estimator = Estimator::Gibbs);

std::string format_tuple(const std::vector<Value>& tuple);

}  // namespace kbc
