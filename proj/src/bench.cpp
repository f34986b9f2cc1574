#include "kbc/bench.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>

#include "kbc/grounder.hpp"
#include "kbc/rulelang.hpp"

namespace kbc {

std::optional<double> log_log_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  const double n = static_cast<double>(points.size());
  const double den = n * sxx - sx * sx;
  if (den == 0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

ScalingResult scaling_bench(std::span<const std::size_t> sizes, const SynthSpec& base, const LearnConfig& config) {
  if (sizes.empty()) throw Error(Errc::InvalidSize, "no sizes given");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw Error(Errc::InvalidSize, "sizes must be positive");
    if (i && sizes[i] <= sizes[i - 1]) throw Error(Errc::InvalidSize, "sizes must be strictly increasing");
  }
  auto cfg = config;
  cfg.epochs = 1;
  ScalingResult result;
  std::vector<std::pair<double, double>> xy;
  for (auto n : sizes) {
    auto spec = base;
    spec.samples = n;
    const auto data = synthesize(spec);
    const auto rules = parse_rule_file(data.rules_text);
    const auto start = std::chrono::steady_clock::now();
    const auto grounding = ground(rules, data.db);
    const auto corpus = make_corpus(grounding);
    train(corpus, cfg, grounding.weights);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.points.push_back({n, grounding.stats().n_variables, secs});
    xy.emplace_back(static_cast<double>(result.points.back().n_variables), std::max(secs, 1e-9));
  }
  result.slope = log_log_slope(xy);
  return result;
}

std::string format_scaling_csv(const ScalingResult& result) {
  std::string out = "n_variables,wall_seconds\n";
  for (const auto& p : result.points) out += std::to_string(p.n_variables) + "," + format_real(p.wall_seconds) + "\n";
  out += "# slope," + (result.slope ? format_real(*result.slope) : std::string("n/a")) + "\n";
  return out;
}

BenchSpec parse_bench_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bench spec is not valid JSON: ") + e.what());
  }
  BenchSpec s;
  try {
    s.mode = j.value("mode", s.mode);
    if (s.mode != "throughput" && s.mode != "scaling")
      throw Error(Errc::InvalidArgument, "bench mode must be 'throughput' or 'scaling'");
    s.graphs.graphs = j.value("graphs", s.graphs.graphs);
    s.graphs.variables_per_graph = j.value("variables_per_graph", s.graphs.variables_per_graph);
    s.graphs.max_degree = j.value("max_degree", s.graphs.max_degree);
    s.graphs.pairwise_per_variable = j.value("pairwise_per_variable", s.graphs.pairwise_per_variable);
    s.graphs.weight_range = j.value("weight_range", s.graphs.weight_range);
    s.graphs.seed = j.value("seed", s.graphs.seed);
    s.workers = j.value("workers", s.workers);
    s.sweeps = j.value("sweeps", s.sweeps);
    s.sizes = j.value("sizes", s.sizes);
    if (j.contains("synth")) s.synth = parse_synth_spec(j.at("synth").dump());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad bench spec field: ") + e.what());
  }
  if (s.workers.empty()) throw Error(Errc::InvalidArgument, "bench spec needs at least one worker count");
  return s;
}

}  // namespace kbc
