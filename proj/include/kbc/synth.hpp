#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "kbc/datastore.hpp"
#include "kbc/graph.hpp"

namespace kbc {

/// Parameters of a synthetic KB. Labels are drawn exactly from the model
/// defined by the template rules and random "true" weights.
struct SynthSpec {
  /// "recovery": Boolean attributes and affordances with features.
  /// "scene": adds a scene category and uses the full image-label rule set.
  std::string template_name = "recovery";
  std::size_t samples = 1000;
  std::size_t categories = 3;  // scene only
  std::size_t attributes = 3;
  std::size_t affordances = 3;
  std::size_t feature_dim = 2;
  bool correlations = true;
  /// True weights are drawn uniformly from [-weight_range, weight_range].
  double weight_range = 2.0;
  /// Fraction of samples (the last ones) whose labels are left unobserved.
  double test_fraction = 0.0;
  /// Adds location, date and business tables for metadata queries (scene only).
  bool metadata = false;
  std::uint64_t seed = 1;
};

/// Reads a JSON object with the field names above ("template" for the
/// template name). Unknown fields raise InvalidArgument.
SynthSpec parse_synth_spec(std::string_view json_text);
std::string format_synth_spec(const SynthSpec& spec);

struct SynthResult {
  Database db;
  std::string rules_text;
  WeightStore truth;
};

/// Throws TooLargeToEnumerate when one sample's graph is too big to sample
/// exactly, InvalidSize for zero samples, InvalidArgument for bad fields.
SynthResult synthesize(const SynthSpec& spec);

/// Writes `<dir>/data/` (schema and tables), `<dir>/rules.kbr`,
/// `<dir>/truth_weights.tsv` and `<dir>/spec.json`.
void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthResult& result);

/// The image-label rule set: bias, feature, intra- and inter-correlation rules.
std::string_view scene_rules();
std::string recovery_rules(const SynthSpec& spec);

}  // namespace kbc
