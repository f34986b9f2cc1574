#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kbc/learner.hpp"
#include "kbc/sampler.hpp"
#include "kbc/synth.hpp"

namespace kbc {

struct ScalingPoint {
  std::size_t samples = 0;
  std::size_t n_variables = 0;
  double wall_seconds = 0.0;
};

struct ScalingResult {
  std::vector<ScalingPoint> points;
  /// Least-squares slope of log(wall_seconds) on log(n_variables); empty
  /// with fewer than two points.
  std::optional<double> slope;
};

/// For each sample count: synthesize a corpus from `base`, then time
/// compile (grounding) plus one learning epoch. Throws InvalidSize unless
/// the sizes are positive and strictly increasing.
ScalingResult scaling_bench(std::span<const std::size_t> sizes, const SynthSpec& base, const LearnConfig& config);

std::optional<double> log_log_slope(std::span<const std::pair<double, double>> points);

/// `n_variables,wall_seconds` rows plus a trailing `# slope,<value|n/a>` line.
std::string format_scaling_csv(const ScalingResult& result);

/// A benchmark description, read from JSON.
struct BenchSpec {
  std::string mode = "throughput";  // or "scaling"
  // throughput
  SyntheticGraphSpec graphs;
  std::vector<unsigned> workers = {1};
  std::size_t sweeps = 10;
  // scaling
  std::vector<std::size_t> sizes;
  SynthSpec synth;
};

BenchSpec parse_bench_spec(std::string_view json_text);

}  // namespace kbc
