#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/graph.hpp"
#include "kbc/grounder.hpp"
#include "kbc/random.hpp"

namespace kbc {

enum class UpdateGranularity { PerSweep, PerStep };

std::string_view granularity_name(UpdateGranularity g) noexcept;
std::optional<UpdateGranularity> parse_granularity(std::string_view name) noexcept;

struct LearnConfig {
  double eta = 0.01;
  double lambda = 0.01;
  std::size_t epochs = 10;
  double eta_decay = 0.95;
  UpdateGranularity granularity = UpdateGranularity::PerSweep;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// Throws InvalidArgument on a non-positive or non-finite eta, negative
  /// lambda, zero epochs, decay outside (0, 1] or zero workers.
  void validate() const;
};

/// One training sample. Label variables of `graph` are free; `data` holds
/// their observed values. Variables listed in `latent` had no observation
/// and are filled in by sampling.
struct TrainingExample {
  FactorGraph graph;
  PossibleWorld data;
  std::vector<std::uint32_t> latent;
};

struct TrainingCorpus {
  std::vector<TrainingExample> examples;
  std::size_t num_weights = 0;

  std::size_t num_variables() const;
};

/// Moves the discrete observations of `graph` into a data world. Returns
/// nothing when the graph has no observed discrete variable.
std::optional<TrainingExample> make_example(const FactorGraph& graph);
TrainingCorpus make_corpus(const Grounding& grounding);

/// I'': one Gibbs sweep over the free variables, started at `data`.
PossibleWorld cd1_negative_world(const FactorGraph& graph, const PossibleWorld& data, std::span<const double> weights,
                                 Philox& rng, bool shuffle = true);

/// w_k += eta * sum(f(I') - f(I'')) - eta * 2 * lambda * w_k for every key
/// touched by the graph. Throws NonFiniteWeight before writing a bad value.
void cd1_update(const FactorGraph& graph, const PossibleWorld& data, const PossibleWorld& negative,
                std::span<double> weights, double eta, double lambda);

struct EpochMetrics {
  std::size_t epoch = 0;
  double eta = 0.0;
  double seconds = 0.0;
  double samples_per_second = 0.0;
  /// Mean over examples of the L1 norm of the CD-1 feature difference.
  double mean_abs_gradient = 0.0;
  double weight_norm = 0.0;
};

struct TrainResult {
  WeightStore weights;
  std::vector<EpochMetrics> log;
};

/// Serial CD-1 learning: every epoch visits the examples in a shuffled
/// order; eta decays by `eta_decay` after each epoch. Deterministic.
TrainResult train(const TrainingCorpus& corpus, const LearnConfig& config, WeightStore initial);

/// Lock-free asynchronous variant: `config.workers` threads share one
/// atomic weight vector and update it without coordination.
TrainResult parallel_train(const TrainingCorpus& corpus, const LearnConfig& config, WeightStore initial);

/// -sum log Pr[observed labels; w] + lambda * |w|^2, latents marginalized.
/// Throws TooLargeToEnumerate.
double exact_nll(const TrainingCorpus& corpus, std::span<const double> weights, double lambda);
std::vector<double> exact_nll_gradient(const TrainingCorpus& corpus, std::span<const double> weights, double lambda);

std::string format_metrics_json(const std::vector<EpochMetrics>& log);

}  // namespace kbc
