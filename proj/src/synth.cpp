#include "kbc/synth.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numbers>
#include <random>

#include "io_util.hpp"
#include "kbc/factorgraph.hpp"
#include "kbc/grounder.hpp"
#include "kbc/random.hpp"

namespace kbc {

namespace {

constexpr std::string_view kSceneRules = R"(# Image-label relations

# image features & scene category
{(i, w(c, d), f) | sceneCategory(i, c) & hasFeature(i, d, f)}
{(i, w(c), 1) | sceneCategory(i, c)}

# image features & scene affordance
# scene_affordance_and_scene_features
{(i, w(a, d), f) | hasAffordance(i, a) & hasFeature(i, d, f)}
{(i, w(a), 1) | hasAffordance(i, a)}

# image features & scene attribute
{(i, w(a, d), f) | hasAttribute(i, a) & hasFeature(i, d, f)}
{(i, w(a), 1) | hasAttribute(i, a)}

# Intra-correlations

# affordance & affordance
{((i, a1, a2), w(a1, a2), 1) | hasAffordance(i, a1) & hasAffordance(i, a2)}
{((i, a1, a2), w(a1, a2), 1) | !hasAffordance(i, a1) &
    !hasAffordance(i, a2)}

# attribute & attribute
{((i, a1, a2), w(a1, a2), 1) | hasAttribute(i, a1) & hasAttribute(i, a2)}
{((i, a1, a2), w(a1, a2), 1) | !hasAttribute(i, a1) &
    !hasAttribute(i, a2)}

# Inter-correlations

# category & attribute
{((i, c, a), w(a, c), 1) | sceneCategory(i, c) & hasAttribute(i, a)}
{((i, c, a), w(a, c), 1) | sceneCategory(i, c) &
    !hasAttribute(i, a)}
{((i, c, a), w(a, c), 1) | !sceneCategory(i, c) & hasAttribute(i, a)}
{((i, c, a), w(a, c), 1) | !sceneCategory(i, c) &
    !hasAttribute(i, a)}

# category & affordance
{((i, c, a), w(a, c), 1) | sceneCategory(i, c) & hasAffordance(i, a)}
{((i, c, a), w(a, c), 1) | sceneCategory(i, c) &
    !hasAffordance(i, a)}
{((i, c, a), w(a, c), 1) | !sceneCategory(i, c) & hasAffordance(i, a)}
{((i, c, a), w(a, c), 1) | !sceneCategory(i, c) &
    !hasAffordance(i, a)}
)";

const std::vector<std::string> kCategories = {"beach", "shopping mall", "bar", "forest", "kitchen", "stadium"};
const std::vector<std::string> kAttributes = {"indoor lighting", "glossy", "cluttered space", "sunny", "warm",
                                              "natural light", "open area", "wood", "vegetation", "crowded"};
const std::vector<std::string> kAffordances = {"playing baseball", "travel", "shopping", "drinking", "swimming",
                                               "eating", "hiking", "reading"};

std::string label_name(const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : names[i % names.size()] + " " + std::to_string(i / names.size() + 1);
}

struct Place {
  const char* name;
  double lat, lon;
};

const std::vector<Place> kPlaces = {{"Fisherman's Wharf", 37.8080, -122.4177}, {"Boston", 42.3601, -71.0589},
                                    {"AT&T Plaza", 41.8827, -87.6233},        {"Seattle", 47.6062, -122.3321},
                                    {"Santa Monica", 34.0100, -118.4960},     {"Miami Beach", 25.7907, -80.1300}};

std::string latlong(double lat, double lon) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f,%.5f", lat, lon);
  return buf;
}

/// A point `km` kilometres from (lat, lon) in a random direction.
std::string jitter(const Place& p, double km, Philox& rng) {
  const double theta = 2 * std::numbers::pi * rng.uniform();
  const double dlat = km / 111.195 * std::cos(theta);
  const double dlon = km / (111.195 * std::cos(p.lat * std::numbers::pi / 180)) * std::sin(theta);
  return latlong(p.lat + dlat, p.lon + dlon);
}

TableDef label_table(const std::string& name, const std::string& label_col) {
  TableDef d;
  d.name = name;
  d.columns = {{"image", ValueType::Integer}, {label_col, ValueType::Text}, {"value", ValueType::Boolean}};
  d.key_columns = {"image", label_col};
  d.sample_column = "image";
  d.role = VariableRole::Boolean;
  d.value_column = "value";
  return d;
}

TableDef relation(const std::string& name, std::vector<ColumnDef> cols, std::vector<std::string> key) {
  TableDef d;
  d.name = name;
  d.columns = std::move(cols);
  d.key_columns = std::move(key);
  return d;
}

void add_metadata(Database& db, const SynthSpec& spec, Philox& rng) {
  using VT = ValueType;
  std::vector<Row> loc, dates, geo, malls, hotels, bars, temps;
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const auto& p = kPlaces[rng.below(static_cast<std::uint32_t>(kPlaces.size()))];
    const double km = rng.uniform() < 0.7 ? 3.0 * rng.uniform() : 10.0 + 30.0 * rng.uniform();
    loc.push_back({Value(static_cast<std::int64_t>(i)), Value(jitter(p, km, rng))});
    char date[16];
    std::snprintf(date, sizeof date, "%04u-%02u-%02u", 2012 + rng.below(3), 1 + rng.below(12), 1 + rng.below(28));
    dates.push_back({Value(static_cast<std::int64_t>(i)), Value(std::string(date))});
  }
  for (const auto& p : kPlaces) {
    geo.push_back({Value(p.name), Value(latlong(p.lat, p.lon))});
    for (const char* d : {"2013/12/25", "2013/08/15"})
      temps.push_back({Value(p.name), Value(std::round((5.0 + 25.0 * rng.uniform()) * 10) / 10), Value(d)});
  }
  malls = {{Value("Pier 39 Marketplace"), Value(latlong(37.8087, -122.4098)), Value("94133")},
           {Value("Ghirardelli Square"), Value(latlong(37.8059, -122.4229)), Value("94109")},
           {Value("Westfield Centre"), Value(latlong(37.7841, -122.4075)), Value("94103")},
           {Value("Copley Place"), Value(latlong(42.3475, -71.0770)), Value("02116")}};
  const auto boston = latlong(kPlaces[1].lat, kPlaces[1].lon);
  hotels = {{Value("Harbor Hotel"), Value(boston), Value("2013-12-25"), Value(289.0), Value("617-555-0101")},
            {Value("Harbor Hotel"), Value(boston), Value("2014-01-10"), Value(249.0), Value("617-555-0101")},
            {Value("Parker House"), Value(boston), Value("2013-12-25"), Value(199.0), Value("617-555-0144")},
            {Value("Pike Place Inn"), Value(latlong(47.6097, -122.3422)), Value("2013-12-25"), Value(159.0),
             Value("206-555-0190")}};
  bars = {{Value("Cloud Gate Tavern"), Value(latlong(41.8830, -87.6240)), Value("$$"), Value("312-555-0111")},
          {Value("Plaza Pub"), Value(latlong(41.8800, -87.6280)), Value("$"), Value("312-555-0123")},
          {Value("Far North Bar"), Value(latlong(41.9500, -87.6500)), Value("$$$"), Value("312-555-0177")}};

  db.put(DataTable(relation("hasLocation", {{"image", VT::Integer}, {"latlong", VT::Text}}, {"image"}), loc));
  db.put(DataTable(relation("captureDate", {{"image", VT::Integer}, {"date", VT::Text}}, {"image"}), dates));
  db.put(DataTable(relation("geoName", {{"name", VT::Text}, {"latlong", VT::Text}}, {"name"}), geo));
  db.put(DataTable(relation("mall", {{"name", VT::Text}, {"latlong", VT::Text}, {"zip", VT::Text}}, {"name"}), malls));
  db.put(DataTable(relation("hotel",
                            {{"name", VT::Text}, {"latlong", VT::Text}, {"date", VT::Text}, {"price", VT::Real},
                             {"phone", VT::Text}},
                            {"name", "date"}),
                   hotels));
  db.put(DataTable(
      relation("bar", {{"name", VT::Text}, {"latlong", VT::Text}, {"price", VT::Text}, {"phone", VT::Text}}, {"name"}),
      bars));
  db.put(DataTable(
      relation("temperature", {{"location", VT::Text}, {"degree", VT::Real}, {"date", VT::Text}}, {"location", "date"}),
      temps));
}

void check_spec(const SynthSpec& spec) {
  if (spec.samples == 0) throw Error(Errc::InvalidSize, "synthetic spec needs at least one sample");
  if (spec.template_name != "recovery" && spec.template_name != "scene")
    throw Error(Errc::InvalidArgument, "unknown synthetic template '" + spec.template_name + "'");
  if (spec.template_name == "scene" && spec.categories == 0)
    throw Error(Errc::InvalidArgument, "the scene template needs at least one category");
  if (spec.attributes == 0 && spec.affordances == 0 && spec.template_name == "recovery")
    throw Error(Errc::InvalidArgument, "the recovery template needs attributes or affordances");
  if (!(spec.weight_range >= 0) || !std::isfinite(spec.weight_range))
    throw Error(Errc::InvalidArgument, "weight_range must be finite and >= 0");
  if (!(spec.test_fraction >= 0 && spec.test_fraction <= 1))
    throw Error(Errc::InvalidArgument, "test_fraction must lie in [0, 1]");
}

}  // namespace

std::string_view scene_rules() { return kSceneRules; }

std::string recovery_rules(const SynthSpec& spec) {
  std::string out = "# label biases\n";
  if (spec.attributes) out += "{(i, w(a), 1) | hasAttribute(i, a)}\n";
  if (spec.affordances) out += "{(i, w(a), 1) | hasAffordance(i, a)}\n";
  if (spec.correlations && spec.attributes && spec.affordances)
    out += "\n# affordance & attribute co-occurrence\n"
           "{((i, a1, a2), w(a1, a2), 1) | hasAffordance(i, a1) & hasAttribute(i, a2)}\n";
  if (spec.feature_dim && spec.attributes)
    out += "\n# attribute & image features\n{(i, w(a, d), f) | hasAttribute(i, a) & hasFeature(i, d, f)}\n";
  return out;
}

SynthSpec parse_synth_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "synthetic spec must be a JSON object");
  SynthSpec s;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "template") s.template_name = v.get<std::string>();
      else if (k == "samples") s.samples = v.get<std::size_t>();
      else if (k == "categories") s.categories = v.get<std::size_t>();
      else if (k == "attributes") s.attributes = v.get<std::size_t>();
      else if (k == "affordances") s.affordances = v.get<std::size_t>();
      else if (k == "feature_dim") s.feature_dim = v.get<std::size_t>();
      else if (k == "correlations") s.correlations = v.get<bool>();
      else if (k == "weight_range") s.weight_range = v.get<double>();
      else if (k == "test_fraction") s.test_fraction = v.get<double>();
      else if (k == "metadata") s.metadata = v.get<bool>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else throw Error(Errc::InvalidArgument, "unknown synthetic spec field '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad synthetic spec field: ") + e.what());
  }
  check_spec(s);
  return s;
}

std::string format_synth_spec(const SynthSpec& s) {
  nlohmann::json j = {{"template", s.template_name}, {"samples", s.samples},         {"categories", s.categories},
                      {"attributes", s.attributes},  {"affordances", s.affordances}, {"feature_dim", s.feature_dim},
                      {"correlations", s.correlations}, {"weight_range", s.weight_range},
                      {"test_fraction", s.test_fraction}, {"metadata", s.metadata}, {"seed", s.seed}};
  return j.dump(2) + "\n";
}

SynthResult synthesize(const SynthSpec& spec) {
  check_spec(spec);
  const bool scene = spec.template_name == "scene";
  const std::size_t n = spec.samples;
  Philox feat_rng(spec.seed, stream_id(10, 0));
  std::normal_distribution<double> normal(0.0, 1.0);

  // Labels start filled with placeholders so multinomial domains are complete.
  std::vector<Row> cat_rows, attr_rows, aff_rows, feat_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const Value img(static_cast<std::int64_t>(i));
    if (scene) cat_rows.push_back({img, Value(label_name(kCategories, i % spec.categories))});
    for (std::size_t a = 0; a < spec.attributes; ++a)
      attr_rows.push_back({img, Value(label_name(kAttributes, a)), Value(false)});
    for (std::size_t a = 0; a < spec.affordances; ++a)
      aff_rows.push_back({img, Value(label_name(kAffordances, a)), Value(false)});
    for (std::size_t d = 0; d < spec.feature_dim; ++d)
      feat_rows.push_back({img, Value(static_cast<std::int64_t>(d)), Value(std::round(normal(feat_rng) * 1e4) / 1e4)});
  }
  if (scene && n < spec.categories)
    throw Error(Errc::InvalidArgument, "the scene template needs at least as many samples as categories");

  Database db;
  if (scene) {
    TableDef d;
    d.name = "sceneCategory";
    d.columns = {{"image", ValueType::Integer}, {"category", ValueType::Text}};
    d.key_columns = {"image"};
    d.sample_column = "image";
    d.role = VariableRole::Multinomial;
    d.value_column = "category";
    for (std::size_t c = 0; c < spec.categories; ++c) d.domain.emplace_back(label_name(kCategories, c));
    db.put(DataTable(d, cat_rows));
  }
  if (spec.attributes) db.put(DataTable(label_table("hasAttribute", "attribute"), attr_rows));
  if (spec.affordances) db.put(DataTable(label_table("hasAffordance", "affordance"), aff_rows));
  if (spec.feature_dim) {
    TableDef d;
    d.name = "hasFeature";
    d.columns = {{"image", ValueType::Integer}, {"dim", ValueType::Integer}, {"value", ValueType::Real}};
    d.key_columns = {"image", "dim"};
    d.sample_column = "image";
    d.role = VariableRole::Continuous;
    d.value_column = "value";
    db.put(DataTable(d, feat_rows));
  }

  SynthResult out;
  out.rules_text = scene ? std::string(kSceneRules) : recovery_rules(spec);
  auto grounding = ground(parse_rule_file(out.rules_text), db);
  out.truth = grounding.weights;
  Philox wrng(spec.seed, stream_id(11, 0));
  for (std::size_t k = 0; k < out.truth.size(); ++k)
    out.truth.set(k, spec.weight_range * (2.0 * wrng.uniform() - 1.0));
  const auto w = out.truth.values();

  const std::size_t n_test = static_cast<std::size_t>(std::ceil(spec.test_fraction * static_cast<double>(n)));
  std::vector<std::vector<Row>*> rows_of(grounding.predicates.size(), nullptr);
  for (std::size_t p = 0; p < grounding.predicates.size(); ++p) {
    const auto& name = grounding.predicates[p];
    if (name == "sceneCategory") rows_of[p] = &cat_rows;
    else if (name == "hasAttribute") rows_of[p] = &attr_rows;
    else if (name == "hasAffordance") rows_of[p] = &aff_rows;
  }
  for (std::size_t gi = 0; gi < grounding.graphs.size(); ++gi) {
    FactorGraph g = grounding.graphs[gi];
    for (std::uint32_t v = 0; v < g.num_variables(); ++v)
      if (g.variable(v).is_discrete()) g.mutable_variable(v).observed = kUnobserved;
    if (world_count(g) > kMaxEnumeratedWorlds)
      throw Error(Errc::TooLargeToEnumerate, "synthetic sample graph is too large to sample exactly");
    const double log_z = exact_log_partition(g, w);
    Philox rng(spec.seed, stream_id(12, gi));
    double u = rng.uniform();
    PossibleWorld chosen;
    for_each_world(g, [&](const PossibleWorld& world) {
      if (!chosen.values.empty()) return;
      u -= std::exp(log_weight(g, world, w) - log_z);
      if (u < 0) chosen = world;
    });
    if (chosen.values.empty()) {  // rounding left a sliver of mass at the end
      for_each_world(g, [&](const PossibleWorld& world) { chosen = world; });
    }
    const auto sample = g.sample_id().as_integer();
    const bool hidden = static_cast<std::size_t>(sample) >= n - n_test;
    for (std::uint32_t v = 0; v < g.num_variables(); ++v) {
      const auto& d = g.variable(v);
      if (!d.is_discrete()) continue;
      auto& rows = *rows_of[d.predicate];
      if (d.kind == VariableKind::Multinomial) {
        rows[sample][1] = hidden ? Value() : grounding.domains[d.predicate][chosen.values[v]];
        continue;
      }
      const std::size_t per = &rows == &attr_rows ? spec.attributes : spec.affordances;
      for (std::size_t r = sample * per; r < (sample + 1) * per; ++r)
        if (rows[r][1] == d.key[0]) rows[r][2] = hidden ? Value() : Value(chosen.values[v] == 1);
    }
  }
  if (scene) db.put(DataTable(db.table("sceneCategory").def(), cat_rows));
  if (spec.attributes) db.put(DataTable(db.table("hasAttribute").def(), attr_rows));
  if (spec.affordances) db.put(DataTable(db.table("hasAffordance").def(), aff_rows));
  if (scene && spec.metadata) {
    Philox mrng(spec.seed, stream_id(13, 0));
    add_metadata(db, spec, mrng);
  }
  out.db = std::move(db);
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthResult& result) {
  result.db.save(dir / "data");
  detail::write_text_file(dir / "rules.kbr", result.rules_text);
  detail::write_text_file(dir / "truth_weights.tsv", format_weights(result.truth));
  detail::write_text_file(dir / "spec.json", format_synth_spec(spec));
}

}  // namespace kbc
