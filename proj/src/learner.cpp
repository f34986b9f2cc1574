#include "kbc/learner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "kbc/factorgraph.hpp"
#include "kbc/sampler.hpp"
#include "parallel.hpp"

namespace kbc {

std::string_view granularity_name(UpdateGranularity g) noexcept {
  return g == UpdateGranularity::PerSweep ? "per_sweep" : "per_step";
}

std::optional<UpdateGranularity> parse_granularity(std::string_view name) noexcept {
  if (name == "per_sweep") return UpdateGranularity::PerSweep;
  if (name == "per_step") return UpdateGranularity::PerStep;
  return std::nullopt;
}

void LearnConfig::validate() const {
  if (!std::isfinite(eta) || eta <= 0) throw Error(Errc::InvalidArgument, "eta must be finite and positive");
  if (!std::isfinite(lambda) || lambda < 0) throw Error(Errc::InvalidArgument, "lambda must be finite and >= 0");
  if (epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be at least 1");
  if (!(eta_decay > 0 && eta_decay <= 1)) throw Error(Errc::InvalidArgument, "eta_decay must lie in (0, 1]");
  if (workers < 1) throw Error(Errc::InvalidArgument, "workers must be at least 1");
}

std::size_t TrainingCorpus::num_variables() const {
  std::size_t n = 0;
  for (const auto& e : examples) n += e.graph.num_variables();
  return n;
}

std::optional<TrainingExample> make_example(const FactorGraph& graph) {
  TrainingExample ex{graph, graph.initial_world(), {}};
  bool any = false;
  for (std::uint32_t v = 0; v < graph.num_variables(); ++v) {
    auto& d = ex.graph.mutable_variable(v);
    if (!d.is_discrete()) continue;
    if (d.observed == kUnobserved) {
      ex.latent.push_back(v);
    } else {
      any = true;
      d.observed = kUnobserved;
    }
  }
  if (!any) return std::nullopt;
  return ex;
}

TrainingCorpus make_corpus(const Grounding& grounding) {
  TrainingCorpus corpus;
  corpus.num_weights = grounding.weights.size();
  for (const auto& g : grounding.graphs)
    if (auto ex = make_example(g)) corpus.examples.push_back(std::move(*ex));
  return corpus;
}

PossibleWorld cd1_negative_world(const FactorGraph& graph, const PossibleWorld& data, std::span<const double> weights,
                                 Philox& rng, bool shuffle) {
  PossibleWorld out = data;
  auto order = graph.free_variables();
  std::vector<double> scratch;
  detail::sweep(graph, order, out.values.data(), PlainWeights{weights.data()}, rng, shuffle, scratch,
                [](std::uint32_t) {});
  return out;
}

namespace {

struct PlainAccess {
  double* w;
  double operator[](std::size_t i) const noexcept { return w[i]; }
  void put(std::size_t i, double v) const noexcept { w[i] = v; }
};

struct AtomicAccess {
  std::atomic<double>* w;
  double operator[](std::size_t i) const noexcept { return w[i].load(std::memory_order_relaxed); }
  void put(std::size_t i, double v) const noexcept { w[i].store(v, std::memory_order_relaxed); }
};

[[noreturn]] void non_finite(const FactorGraph& g, std::size_t k, double value) {
  throw Error(Errc::NonFiniteWeight, "weight " + std::to_string(k) + " became " + std::to_string(value) +
                                         " while training on sample " + g.sample_id().to_string());
}

/// Per-thread gradient buffer keyed by weight index.
struct Gradient {
  std::vector<double> value;
  std::vector<std::uint8_t> seen;
  std::vector<std::uint32_t> touched;

  explicit Gradient(std::size_t n) : value(n, 0.0), seen(n, 0) {}
  void add(std::uint32_t k, double d) {
    if (!seen[k]) seen[k] = 1, touched.push_back(k);
    value[k] += d;
  }
  template <class Access>
  double apply(const FactorGraph& g, const Access& w, double eta, double lambda) {
    double l1 = 0.0;
    for (auto k : touched) {
      const double cur = w[k];
      const double next = cur + eta * value[k] - eta * 2.0 * lambda * cur;
      if (!std::isfinite(next)) non_finite(g, k, next);
      w.put(k, next);
      l1 += std::abs(value[k]);
      value[k] = 0.0;
      seen[k] = 0;
    }
    touched.clear();
    return l1;
  }
};

struct Worker {
  Gradient grad;
  std::vector<double> scratch;
  std::vector<std::uint32_t> order;
  PossibleWorld pos, neg;

  explicit Worker(std::size_t n) : grad(n) {}

  /// One CD-1 step on one example; returns the L1 norm of its gradient.
  template <class Access>
  double step(const TrainingExample& ex, const Access& w, Philox& rng, double eta, double lambda,
              UpdateGranularity granularity, bool shuffle) {
    const auto& g = ex.graph;
    pos = ex.data;
    if (!ex.latent.empty()) {
      order = ex.latent;
      detail::sweep(g, order, pos.values.data(), w, rng, shuffle, scratch, [](std::uint32_t) {});
    }
    neg = pos;
    order = g.free_variables();
    const auto& factors = g.factors();
    if (granularity == UpdateGranularity::PerSweep) {
      detail::sweep(g, order, neg.values.data(), w, rng, shuffle, scratch, [](std::uint32_t) {});
      for (const auto& f : factors) {
        const double d = eval_factor(g, f, pos.values.data()) - eval_factor(g, f, neg.values.data());
        grad.add(f.weight, d);
      }
      return grad.apply(g, w, eta, lambda);
    }
    double l1 = 0.0;
    detail::sweep(g, order, neg.values.data(), w, rng, shuffle, scratch, [&](std::uint32_t v) {
      for (auto fi : g.markov_blanket(v)) {
        const auto& f = factors[fi];
        const double d = (eval_factor(g, f, pos.values.data()) - eval_factor(g, f, neg.values.data())) / f.count;
        if (d == 0.0) continue;
        const double next = w[f.weight] + eta * d;
        if (!std::isfinite(next)) non_finite(g, f.weight, next);
        w.put(f.weight, next);
        l1 += std::abs(d);
      }
    });
    for (const auto& f : factors) grad.add(f.weight, 0.0);
    grad.apply(g, w, eta, lambda);
    return l1;
  }
};

void check_corpus(const TrainingCorpus& corpus, const WeightStore& initial) {
  if (initial.size() != corpus.num_weights)
    throw Error(Errc::InvalidArgument, "initial weights do not match the corpus");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch, bool shuffle) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Philox rng(seed, stream_id(1, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
  }
  return order;
}

Philox example_rng(std::uint64_t seed, std::size_t epoch, std::size_t n, std::size_t idx) {
  return Philox(seed, stream_id(2, epoch * n + idx));
}

double norm(std::span<const double> w) {
  double s = 0.0;
  for (double x : w) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void cd1_update(const FactorGraph& graph, const PossibleWorld& data, const PossibleWorld& negative,
                std::span<double> weights, double eta, double lambda) {
  if (data.values.size() != graph.num_variables() || negative.values.size() != graph.num_variables())
    throw Error(Errc::UnassignedVariable, "worlds do not cover the graph");
  Gradient grad(weights.size());
  for (const auto& f : graph.factors())
    grad.add(f.weight, eval_factor(graph, f, data.values.data()) - eval_factor(graph, f, negative.values.data()));
  grad.apply(graph, PlainAccess{weights.data()}, eta, lambda);
}

TrainResult train(const TrainingCorpus& corpus, const LearnConfig& config, WeightStore initial) {
  config.validate();
  check_corpus(corpus, initial);
  TrainResult result{std::move(initial), {}};
  auto values = result.weights.mutable_values();
  const PlainAccess w{values.data()};
  Worker worker(values.size());
  const std::size_t n = corpus.examples.size();
  double eta = config.eta;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double l1 = 0.0;
    for (auto idx : epoch_order(n, config.seed, epoch, config.shuffle)) {
      auto rng = example_rng(config.seed, epoch, n, idx);
      l1 += worker.step(corpus.examples[idx], w, rng, eta, config.lambda, config.granularity, config.shuffle);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back({epoch + 1, eta, secs, secs > 0 ? n / secs : 0.0, n ? l1 / n : 0.0, norm(values)});
    eta *= config.eta_decay;
  }
  return result;
}

TrainResult parallel_train(const TrainingCorpus& corpus, const LearnConfig& config, WeightStore initial) {
  config.validate();
  check_corpus(corpus, initial);
  if (config.workers == 1) return train(corpus, config, std::move(initial));
  const auto init = initial.values();
  std::vector<std::atomic<double>> shared(init.size());
  for (std::size_t i = 0; i < init.size(); ++i) shared[i].store(init[i], std::memory_order_relaxed);
  const AtomicAccess w{shared.data()};
  const std::size_t n = corpus.examples.size();
  std::vector<Worker> workers;
  for (unsigned t = 0; t < config.workers; ++t) workers.emplace_back(shared.size());
  std::vector<double> l1(config.workers, 0.0);

  TrainResult result{std::move(initial), {}};
  double eta = config.eta;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = epoch_order(n, config.seed, epoch, config.shuffle);
    std::fill(l1.begin(), l1.end(), 0.0);
    detail::parallel_for(config.workers, config.workers, [&](std::size_t t) {
      for (std::size_t i = n * t / config.workers; i < n * (t + 1) / config.workers; ++i) {
        const auto idx = order[i];
        auto rng = example_rng(config.seed, epoch, n, idx);
        l1[t] += workers[t].step(corpus.examples[idx], w, rng, eta, config.lambda, config.granularity, config.shuffle);
      }
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<double> snapshot(shared.size());
    for (std::size_t i = 0; i < shared.size(); ++i) snapshot[i] = shared[i].load(std::memory_order_relaxed);
    const double total = std::accumulate(l1.begin(), l1.end(), 0.0);
    result.log.push_back({epoch + 1, eta, secs, secs > 0 ? n / secs : 0.0, n ? total / n : 0.0, norm(snapshot)});
    eta *= config.eta_decay;
  }
  for (std::size_t i = 0; i < shared.size(); ++i) result.weights.set(i, shared[i].load(std::memory_order_relaxed));
  return result;
}

namespace {

FactorGraph clamp_observed(const TrainingExample& ex) {
  FactorGraph g = ex.graph;
  std::vector<bool> latent(g.num_variables(), false);
  for (auto v : ex.latent) latent[v] = true;
  for (std::uint32_t v = 0; v < g.num_variables(); ++v)
    if (g.variable(v).is_discrete() && !latent[v]) g.mutable_variable(v).observed = ex.data.values[v];
  return g;
}

double regularizer(std::span<const double> w, double lambda) {
  double s = 0.0;
  for (double x : w) s += x * x;
  return lambda * s;
}

}  // namespace

double exact_nll(const TrainingCorpus& corpus, std::span<const double> weights, double lambda) {
  double nll = 0.0;
  for (const auto& ex : corpus.examples) {
    const double log_z = exact_log_partition(ex.graph, weights);
    const double log_num = ex.latent.empty() ? log_weight(ex.graph, ex.data, weights)
                                             : exact_log_partition(clamp_observed(ex), weights);
    nll += log_z - log_num;
  }
  return nll + regularizer(weights, lambda);
}

std::vector<double> exact_nll_gradient(const TrainingCorpus& corpus, std::span<const double> weights, double lambda) {
  std::vector<double> grad(weights.size(), 0.0);
  for (const auto& ex : corpus.examples) {
    const auto model = exact_feature_expectations(ex.graph, weights);
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += model[k];
    if (ex.latent.empty()) {
      for (const auto& f : ex.graph.factors()) grad[f.weight] -= eval_factor(ex.graph, f, ex.data.values.data());
    } else {
      const auto clamped = exact_feature_expectations(clamp_observed(ex), weights);
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= clamped[k];
    }
  }
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += 2.0 * lambda * weights[k];
  return grad;
}

std::string format_metrics_json(const std::vector<EpochMetrics>& log) {
  auto arr = nlohmann::json::array();
  for (const auto& m : log)
    arr.push_back({{"epoch", m.epoch},
                   {"eta", m.eta},
                   {"seconds", m.seconds},
                   {"samples_per_second", m.samples_per_second},
                   {"mean_abs_gradient", m.mean_abs_gradient},
                   {"weight_norm", m.weight_norm}});
  return arr.dump(2) + "\n";
}

}  // namespace kbc
