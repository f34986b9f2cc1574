#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kbc/datastore.hpp"
#include "kbc/grounder.hpp"
#include "kbc/rulelang.hpp"

namespace kbc {

inline constexpr int kKbFormatMajor = 1;
inline constexpr int kKbFormatMinor = 0;
inline constexpr std::string_view kToolVersion = "1.0.0";

inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kRulesFile = "rules.kbr";
inline constexpr std::string_view kWeightsFile = "weights.tsv";
inline constexpr std::string_view kKbDataDir = "data";

struct KbManifest {
  int format_major = kKbFormatMajor;
  int format_minor = kKbFormatMinor;
  std::string tool_version{kToolVersion};
  std::uint64_t seed = 0;
  GroundingStats stats;
  /// SHA-256 (hex) of every artifact, keyed by path relative to the KB dir.
  std::map<std::string, std::string> files;
  bool has_weights = false;
};

/// A compiled knowledge base: data, rules and the grounded model. The
/// current weights live in `grounding.weights`.
struct KnowledgeBase {
  Database db;
  std::string rules_text;
  std::vector<RuleAst> rules;
  Grounding grounding;
  KbManifest manifest;
};

/// Parses and validates the rules and grounds them over `db`.
KnowledgeBase compile_kb(Database db, std::string rules_text, const GroundOptions& options = {});

/// Writes data, rules, weights (when `with_weights`) and the manifest.
void save_kb(const std::filesystem::path& dir, KnowledgeBase& kb, bool with_weights = true);

/// Verifies hashes and format version, re-grounds, and checks the recorded
/// stats. Throws HashMismatch, VersionMismatch, IoError.
KnowledgeBase load_kb(const std::filesystem::path& dir, const GroundOptions& options = {});

/// Replaces the KB's weights file and updates the manifest in place.
void store_kb_weights(const std::filesystem::path& dir, KnowledgeBase& kb);

std::string sha256_hex(std::string_view data);

WeightStore read_weights_file(const std::filesystem::path& path);
void write_weights_file(const std::filesystem::path& path, const WeightStore& weights);
/// Loads weights from `path` into `grounding`; every key of the file must
/// exist in the grounding (InvalidArgument otherwise).
void apply_weights(Grounding& grounding, const WeightStore& weights);

}  // namespace kbc
