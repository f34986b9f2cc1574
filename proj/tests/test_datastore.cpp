#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "kbc/datastore.hpp"
#include "kbc/error.hpp"

using namespace kbc;

namespace {

TableDef label_def() {
  return parse_schema(R"(
[hasAffordance]
columns = image:integer, affordance:text, value:boolean
key = image, affordance
sample = image
variable = boolean value
)").tables[0];
}

template <class Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Value, LiteralRoundTrip) {
  EXPECT_EQ(Value(2.0).to_literal(), "2.0");
  EXPECT_EQ(Value("a\"b").to_literal(), "\"a\\\"b\"");
  EXPECT_EQ(Value(std::int64_t{7}).to_string(), "7");
  EXPECT_EQ(*parse_real("0.1"), 0.1);
  EXPECT_FALSE(parse_integer("1.5"));
  EXPECT_TRUE(Value() < Value(1));
  EXPECT_TRUE(Value(1) < Value(0.5));
}

TEST(Value, RealsPrintShortest) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = d(rng);
    EXPECT_EQ(*parse_real(format_real(x)), x);
  }
}

TEST(Schema, FormatParseFixedPoint) {
  const auto text = R"(
[sceneCategory]
columns = image:integer, category:text
key = image
sample = image
variable = multinomial category
domain = beach, bar

[geoName]
columns = name:text, latlong:text
key = name
)";
  const auto s = parse_schema(text);
  ASSERT_EQ(s.tables.size(), 2u);
  EXPECT_EQ(s.tables[0].role, VariableRole::Multinomial);
  EXPECT_EQ(s.tables[0].domain.size(), 2u);
  EXPECT_EQ(parse_schema(format_schema(s)), s);
}

TEST(Schema, RejectsInconsistentDefinitions) {
  EXPECT_EQ(code_of([] { parse_schema("[t]\ncolumns = a:integer\n"); }), Errc::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema("[t]\ncolumns = a:integer\nkey = b\n"); }), Errc::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema("[t]\ncolumns = a:integer, v:text\nkey = a\nsample = a\nvariable = boolean v\n"); }),
            Errc::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema("[t]\ncolumns = a:integer, v:text\nkey = a\ndomain = x\n"); }),
            Errc::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema("[t]\ncolumns = a:wide\nkey = a\n"); }), Errc::SchemaError);
}

TEST(Table, ParsesTypedRows) {
  const auto t = parse_table("image,affordance,value\n1,swimming,true\n1,\"dining, out\",false\n2,swimming,\n",
                             label_def());
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.row(1)[1], Value("dining, out"));
  EXPECT_TRUE(t.row(2)[2].is_null());
  EXPECT_EQ(t.rows_for_sample(Value(1)).size(), 2u);
  EXPECT_EQ(*t.find_key({Value(2), Value("swimming")}), 2u);
}

TEST(Table, ReportsBadData) {
  const auto def = label_def();
  EXPECT_EQ(code_of([&] { parse_table("image,affordance,value\n1,swimming,maybe\n", def); }), Errc::TypeMismatch);
  EXPECT_EQ(code_of([&] { parse_table("image,affordance,value\n1,a,true\n1,a,false\n", def); }),
            Errc::DuplicateKey);
  EXPECT_EQ(code_of([&] { parse_table("image,value\n1,true\n", def); }), Errc::MissingColumn);
  EXPECT_EQ(code_of([&] { parse_table("image,affordance,value\n1,a\n", def); }), Errc::MissingColumn);
  try {
    parse_table("image,affordance,value\n1,a,true\nx,b,false\n", def);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TypeMismatch);
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.column(), 0u);
  }
}

TEST(Table, SerializeRoundTrip) {
  std::mt19937_64 rng(5);
  const auto def = label_def();
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Row> rows;
    const char* names[] = {"a", "b c", "d,e", "\"q\"", "line\nbreak", ""};
    for (int i = 0; i < 20; ++i) {
      Value v = rng() % 4 == 0 ? Value() : Value(rng() % 2 == 0);
      rows.push_back({Value(static_cast<std::int64_t>(i / 3)), Value(std::string(names[rng() % 6]) + std::to_string(i)), v});
    }
    const DataTable t(def, rows);
    const auto again = parse_table(serialize_table(t), def);
    EXPECT_EQ(again.rows(), t.rows());
    EXPECT_EQ(serialize_table(again), serialize_table(t));
  }
}

TEST(Table, SelectMatchesFullScan) {
  std::mt19937_64 rng(9);
  const auto def = label_def();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Row> rows;
    for (int i = 0; i < 40; ++i)
      rows.push_back({Value(static_cast<std::int64_t>(rng() % 6)), Value("l" + std::to_string(i)), Value(rng() % 2 == 0)});
    const DataTable t(def, rows);
    std::vector<Condition> cond;
    if (rng() % 2) cond.push_back({"image", Value(static_cast<std::int64_t>(rng() % 6))});
    if (rng() % 2) cond.push_back({"value", Value(rng() % 2 == 0)});
    std::vector<Row> naive;
    for (const auto& r : rows) {
      bool ok = true;
      for (const auto& [col, v] : cond) ok = ok && r[*def.column_index(col)] == v;
      if (ok) naive.push_back(r);
    }
    EXPECT_EQ(select(t, cond), naive);
  }
  EXPECT_EQ(code_of([&] { select(DataTable(def, {}), {{"nope", Value(1)}}); }), Errc::UnknownColumn);
}

TEST(Table, StatsCountPositivesPerSample) {
  // 3 images with 14, 13 and 14 positive affordances out of 20 each.
  std::vector<Row> rows;
  const int positives[] = {14, 13, 14};
  for (int img = 0; img < 3; ++img)
    for (int a = 0; a < 20; ++a)
      rows.push_back({Value(img), Value("a" + std::to_string(a)), Value(a < positives[img])});
  const auto st = table_stats(DataTable(label_def(), rows));
  EXPECT_EQ(st.row_count, 60u);
  ASSERT_TRUE(st.positives_per_sample);
  EXPECT_NEAR(*st.positives_per_sample, 41.0 / 3.0, 1e-12);
  EXPECT_EQ(st.column("affordance")->distinct, 20u);
  EXPECT_EQ(st.column("value")->true_count, 41u);
}

TEST(Database, SaveLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "kbc_db_roundtrip";
  std::filesystem::remove_all(dir);
  Database db;
  db.put(DataTable(label_def(), {{Value(1), Value("swim"), Value(true)}, {Value(2), Value("swim"), Value()}}));
  db.save(dir);
  const auto again = Database::load(dir);
  EXPECT_EQ(again.schema(), db.schema());
  EXPECT_EQ(again.table("hasAffordance").rows(), db.table("hasAffordance").rows());
  EXPECT_EQ(code_of([&] { Database::load(dir / "missing"); }), Errc::IoError);
  std::filesystem::remove_all(dir);
}
