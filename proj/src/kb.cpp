#include "kbc/kb.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <json.hpp>

#include "io_util.hpp"
#include "kbc/catalog.hpp"

namespace kbc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::IoError, "SHA-256 failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

KnowledgeBase compile_kb(Database db, std::string rules_text, const GroundOptions& options) {
  KnowledgeBase kb;
  kb.db = std::move(db);
  kb.rules_text = std::move(rules_text);
  kb.rules = parse_rule_file(kb.rules_text);
  kb.grounding = ground(kb.rules, kb.db, options);
  kb.manifest.stats = kb.grounding.stats();
  return kb;
}

WeightStore read_weights_file(const fs::path& path) { return parse_weights(detail::read_text_file(path)); }

void write_weights_file(const fs::path& path, const WeightStore& weights) {
  detail::write_text_file(path, format_weights(weights));
}

void apply_weights(Grounding& grounding, const WeightStore& weights) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto j = grounding.weights.index_of(weights.key(i));
    if (!j)
      throw Error(Errc::InvalidArgument, "weights file has a key of rule " + std::to_string(weights.key(i).rule_id) +
                                             " (" + format_constant_list(weights.key(i).terms) +
                                             ") that the model does not use");
    grounding.weights.set(*j, weights[i]);
  }
}

namespace {

json manifest_json(const KbManifest& m) {
  json files = json::object();
  for (const auto& [path, hash] : m.files) files[path] = hash;
  return {{"format_version", std::to_string(m.format_major) + "." + std::to_string(m.format_minor)},
          {"tool", "kbc"},
          {"tool_version", m.tool_version},
          {"seed", m.seed},
          {"stats",
           {{"n_variables", m.stats.n_variables},
            {"n_factors", m.stats.n_factors},
            {"n_parameters", m.stats.n_parameters}}},
          {"schema", std::string(kKbDataDir) + "/" + std::string(kSchemaFileName)},
          {"rules", kRulesFile},
          {"weights", m.has_weights ? json(kWeightsFile) : json(nullptr)},
          {"files", files}};
}

KbManifest parse_manifest(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("manifest is not valid JSON: ") + e.what());
  }
  KbManifest m;
  try {
    const auto version = j.at("format_version").get<std::string>();
    const auto dot = version.find('.');
    m.format_major = std::stoi(version.substr(0, dot));
    m.format_minor = dot == std::string::npos ? 0 : std::stoi(version.substr(dot + 1));
    if (m.format_major != kKbFormatMajor)
      throw Error(Errc::VersionMismatch, "KB format " + version + " is not readable by this build (format " +
                                             std::to_string(kKbFormatMajor) + ".x)");
    m.tool_version = j.value("tool_version", "");
    m.seed = j.value("seed", std::uint64_t{0});
    const auto& s = j.at("stats");
    m.stats = {s.at("n_variables").get<std::size_t>(), s.at("n_factors").get<std::size_t>(),
               s.at("n_parameters").get<std::size_t>()};
    m.has_weights = !j.at("weights").is_null();
    for (const auto& [path, hash] : j.at("files").items()) m.files[path] = hash.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(Errc::SchemaError, "malformed manifest format_version");
  }
  return m;
}

void write_manifest(const fs::path& dir, const KbManifest& m) {
  detail::write_text_file(dir / kManifestFile, manifest_json(m).dump(2) + "\n");
}

std::string hash_file(const fs::path& path) { return sha256_hex(detail::read_text_file(path)); }

}  // namespace

void save_kb(const fs::path& dir, KnowledgeBase& kb, bool with_weights) {
  fs::create_directories(dir);
  const fs::path data = dir / kKbDataDir;
  kb.db.save(data);
  detail::write_text_file(dir / kRulesFile, kb.rules_text);
  auto& m = kb.manifest;
  m.files.clear();
  m.stats = kb.grounding.stats();
  m.files[std::string(kKbDataDir) + "/" + std::string(kSchemaFileName)] = hash_file(data / kSchemaFileName);
  for (const auto& def : kb.db.schema().tables)
    m.files[std::string(kKbDataDir) + "/" + def.file_name()] = hash_file(data / def.file_name());
  m.files[std::string(kRulesFile)] = hash_file(dir / kRulesFile);
  m.has_weights = with_weights;
  if (with_weights) {
    write_weights_file(dir / kWeightsFile, kb.grounding.weights);
    m.files[std::string(kWeightsFile)] = hash_file(dir / kWeightsFile);
  } else if (fs::exists(dir / kWeightsFile)) {
    fs::remove(dir / kWeightsFile);
  }
  write_manifest(dir, m);
}

void store_kb_weights(const fs::path& dir, KnowledgeBase& kb) {
  write_weights_file(dir / kWeightsFile, kb.grounding.weights);
  kb.manifest.has_weights = true;
  kb.manifest.files[std::string(kWeightsFile)] = hash_file(dir / kWeightsFile);
  write_manifest(dir, kb.manifest);
}

KnowledgeBase load_kb(const fs::path& dir, const GroundOptions& options) {
  if (!fs::exists(dir / kManifestFile)) throw Error(Errc::IoError, "no KB manifest in " + dir.string());
  auto manifest = parse_manifest(detail::read_text_file(dir / kManifestFile));
  for (const auto& [rel, expected] : manifest.files) {
    const auto path = dir / rel;
    if (!fs::exists(path)) throw Error(Errc::IoError, "KB file missing: " + path.string());
    if (hash_file(path) != expected) throw Error(Errc::HashMismatch, "SHA-256 of " + path.string() + " does not match");
  }
  auto kb = compile_kb(Database::load(dir / kKbDataDir), detail::read_text_file(dir / kRulesFile), options);
  if (kb.grounding.stats() != manifest.stats)
    throw Error(Errc::HashMismatch, "grounding stats do not match the manifest");
  if (manifest.has_weights) apply_weights(kb.grounding, read_weights_file(dir / kWeightsFile));
  kb.manifest = std::move(manifest);
  return kb;
}

}  // namespace kbc
