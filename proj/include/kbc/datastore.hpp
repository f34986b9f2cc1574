#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kbc/value.hpp"

namespace kbc {

struct ColumnDef {
  std::string name;
  ValueType type;

  friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

/// How the rows of a table map onto model variables. Tables without a role
/// are metadata: their predicates are plain relations, evaluated exactly.
enum class VariableRole {
  None,         // metadata
  Boolean,      // one Boolean variable per row; value column holds the label
  Multinomial,  // one categorical variable per row; value column holds the category
  Continuous,   // one clamped real-valued evidence variable per row
};

std::string_view role_name(VariableRole role) noexcept;

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::vector<std::string> key_columns;
  std::optional<std::string> sample_column;
  VariableRole role = VariableRole::None;
  std::optional<std::string> value_column;
  /// CSV file name relative to the data directory; empty means `<name>.csv`.
  std::string file;
  /// Declared category labels of a multinomial table. The labels found in
  /// the data are added to these.
  std::vector<Value> domain;

  std::optional<std::size_t> column_index(std::string_view column) const noexcept;
  std::vector<std::size_t> key_indices() const;
  std::string file_name() const { return file.empty() ? name + ".csv" : file; }

  friend bool operator==(const TableDef&, const TableDef&) = default;
};

struct Schema {
  std::vector<TableDef> tables;

  const TableDef* find(std::string_view name) const noexcept;
  /// Throws SchemaError on duplicate names, empty keys or inconsistent roles.
  void validate() const;

  friend bool operator==(const Schema&, const Schema&) = default;
};

/// Parses the schema manifest: one `[table]` stanza per table with
/// `columns`, `key`, and optional `sample`, `variable`, `domain`, `file`
/// entries.
Schema parse_schema(std::string_view text);
Schema load_schema(const std::filesystem::path& path);
std::string format_schema(const Schema& schema);

/// An immutable, type-checked table with a hash index over its key columns
/// and, when a sample column is declared, a per-sample row index.
class DataTable {
 public:
  /// Validates every row against `def` and builds the indexes. Throws
  /// TypeMismatch, DuplicateKey.
  DataTable(TableDef def, std::vector<Row> rows);

  const TableDef& def() const noexcept { return def_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  const Row& row(std::size_t i) const { return rows_[i]; }

  std::optional<std::size_t> find_key(const std::vector<Value>& key) const;
  /// Indices of rows whose sample column equals `sample`, in table order.
  std::span<const std::uint32_t> rows_for_sample(const Value& sample) const;
  /// Distinct sample ids in first-appearance order.
  const std::vector<Value>& samples() const noexcept { return sample_order_; }

 private:
  TableDef def_;
  std::vector<Row> rows_;
  std::unordered_map<std::vector<Value>, std::size_t, RowHash> key_index_;
  std::unordered_map<Value, std::vector<std::uint32_t>, ValueHash> sample_index_;
  std::vector<Value> sample_order_;
};

DataTable parse_table(std::string_view csv, const TableDef& def);
DataTable load_table(const std::filesystem::path& path, const TableDef& def);
/// Canonical CSV: header line, `\n` endings, fields quoted only when empty
/// text or containing `,`, `"`, CR or LF; null cells are empty.
std::string serialize_table(const DataTable& table);
void save_table(const std::filesystem::path& path, const DataTable& table);

using Condition = std::pair<std::string, Value>;

/// Rows matching every equality condition, in table order. Throws
/// UnknownColumn.
std::vector<Row> select(const DataTable& table, const std::vector<Condition>& conditions);

struct ColumnStats {
  std::string name;
  std::size_t distinct = 0;
  std::size_t nulls = 0;
  std::size_t true_count = 0;  // boolean columns only
};

struct TableStats {
  std::size_t row_count = 0;
  std::vector<ColumnStats> columns;
  /// For tables with a sample column and a boolean value column: mean number
  /// of true values per distinct sample.
  std::optional<double> positives_per_sample;

  const ColumnStats* column(std::string_view name) const noexcept;
};

TableStats table_stats(const DataTable& table);

/// A schema together with its loaded tables.
class Database {
 public:
  Database() = default;
  explicit Database(Schema schema) : schema_(std::move(schema)) {}

  /// Reads `schema.ini` from `dir` and loads every table it lists.
  static Database load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  const Schema& schema() const noexcept { return schema_; }
  const DataTable* find(std::string_view name) const noexcept;
  const DataTable& table(std::string_view name) const;
  /// Adds or replaces a table; its definition is added to the schema if new.
  void put(DataTable table);
  const std::map<std::string, DataTable, std::less<>>& tables() const noexcept { return tables_; }

 private:
  Schema schema_;
  std::map<std::string, DataTable, std::less<>> tables_;
};

inline constexpr std::string_view kSchemaFileName = "schema.ini";

}  // namespace kbc
