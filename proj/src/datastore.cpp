#include "kbc/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "io_util.hpp"
#include "kbc/error.hpp"

namespace kbc {

using detail::split;
using detail::trim;

std::string_view role_name(VariableRole role) noexcept {
  switch (role) {
    case VariableRole::None: return "none";
    case VariableRole::Boolean: return "boolean";
    case VariableRole::Multinomial: return "multinomial";
    case VariableRole::Continuous: return "continuous";
  }
  return "?";
}

std::optional<std::size_t> TableDef::column_index(std::string_view column) const noexcept {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == column) return i;
  return std::nullopt;
}

std::vector<std::size_t> TableDef::key_indices() const {
  std::vector<std::size_t> out;
  for (const auto& k : key_columns) out.push_back(*column_index(k));
  return out;
}

const TableDef* Schema::find(std::string_view name) const noexcept {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

void Schema::validate() const {
  std::set<std::string> names;
  for (const auto& t : tables) {
    auto fail = [&](const std::string& what) {
      throw Error(Errc::SchemaError, "table '" + t.name + "': " + what);
    };
    if (!names.insert(t.name).second) fail("duplicate table name");
    if (t.columns.empty()) fail("no columns");
    std::set<std::string> cols;
    for (const auto& c : t.columns)
      if (!cols.insert(c.name).second) fail("duplicate column '" + c.name + "'");
    if (t.key_columns.empty()) fail("key columns must be non-empty");
    std::set<std::string> keys;
    for (const auto& k : t.key_columns) {
      if (!cols.count(k)) fail("key column '" + k + "' is not a column");
      if (!keys.insert(k).second) fail("key column '" + k + "' repeated");
    }
    if (t.sample_column) {
      auto idx = t.column_index(*t.sample_column);
      if (!idx) fail("sample column '" + *t.sample_column + "' is not a column");
      if (t.columns[*idx].type != ValueType::Integer) fail("sample column must be integer");
      if (!keys.count(*t.sample_column)) fail("sample column must be a key column");
    }
    if (!t.domain.empty() && t.role != VariableRole::Multinomial) fail("only multinomial tables declare a domain");
    if (t.role == VariableRole::None) {
      if (t.value_column) fail("value column given without a variable role");
      continue;
    }
    if (!t.sample_column) fail("variable tables need a sample column");
    if (t.key_columns.front() != *t.sample_column) fail("sample column must be the first key column");
    if (!t.value_column) fail("variable tables need a value column");
    auto vidx = t.column_index(*t.value_column);
    if (!vidx) fail("value column '" + *t.value_column + "' is not a column");
    if (keys.count(*t.value_column)) fail("value column cannot be a key column");
    auto vt = t.columns[*vidx].type;
    switch (t.role) {
      case VariableRole::Boolean:
        if (vt != ValueType::Boolean) fail("boolean variable value column must be boolean");
        break;
      case VariableRole::Continuous:
        if (vt != ValueType::Real) fail("continuous variable value column must be real");
        break;
      case VariableRole::Multinomial:
        if (vt != ValueType::Text && vt != ValueType::Integer)
          fail("multinomial value column must be text or integer");
        for (const auto& label : t.domain)
          if (!coerce(label, vt)) fail("domain label '" + label.to_string() + "' does not fit the value column");
        break;
      case VariableRole::None: break;
    }
  }
}

namespace {

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : split(s, ',')) {
    auto p = trim(part);
    if (!p.empty()) out.emplace_back(p);
  }
  return out;
}

}  // namespace

Schema parse_schema(std::string_view text) {
  Schema schema;
  TableDef* current = nullptr;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto hash = raw.find('#');
    auto line = trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) { throw Error(Errc::SchemaError, what, line_no); };
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated table header");
      auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail("empty table name");
      schema.tables.push_back(TableDef{std::string(name), {}, {}, {}, VariableRole::None, {}, {}, {}});
      current = &schema.tables.back();
      continue;
    }
    if (!current) fail("entry outside a [table] stanza");
    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected 'name = value'");
    auto field = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (field == "columns") {
      for (const auto& item : split_list(value)) {
        auto colon = item.find(':');
        if (colon == std::string::npos) fail("column '" + item + "' lacks a type");
        auto type = parse_type_name(trim(std::string_view(item).substr(colon + 1)));
        if (!type) fail("unknown column type in '" + item + "'");
        current->columns.push_back({std::string(trim(std::string_view(item).substr(0, colon))), *type});
      }
    } else if (field == "key") {
      current->key_columns = split_list(value);
    } else if (field == "sample") {
      current->sample_column = std::string(value);
    } else if (field == "file") {
      current->file = std::string(value);
    } else if (field == "domain") {
      current->domain.clear();
      for (const auto& item : split_list(value)) current->domain.emplace_back(item);
    } else if (field == "variable") {
      std::vector<std::string> parts;
      for (auto tok : split(value, ' '))
        if (!trim(tok).empty()) parts.emplace_back(trim(tok));
      if (parts.size() != 2) fail("variable entry must be '<role> <value column>'");
      if (parts[0] == "boolean") current->role = VariableRole::Boolean;
      else if (parts[0] == "multinomial") current->role = VariableRole::Multinomial;
      else if (parts[0] == "continuous") current->role = VariableRole::Continuous;
      else fail("unknown variable role '" + parts[0] + "'");
      current->value_column = parts[1];
    } else {
      fail("unknown schema field '" + std::string(field) + "'");
    }
  }
  schema.validate();
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  return parse_schema(detail::read_text_file(path));
}

std::string format_schema(const Schema& schema) {
  std::string out;
  for (const auto& t : schema.tables) {
    if (!out.empty()) out += '\n';
    out += "[" + t.name + "]\n";
    if (!t.file.empty()) out += "file = " + t.file + "\n";
    out += "columns = ";
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (i) out += ", ";
      out += t.columns[i].name + ":" + std::string(type_name(t.columns[i].type));
    }
    out += "\nkey = ";
    for (std::size_t i = 0; i < t.key_columns.size(); ++i) {
      if (i) out += ", ";
      out += t.key_columns[i];
    }
    out += '\n';
    if (t.sample_column) out += "sample = " + *t.sample_column + "\n";
    if (t.role != VariableRole::None)
      out += "variable = " + std::string(role_name(t.role)) + " " + *t.value_column + "\n";
    if (!t.domain.empty()) {
      out += "domain = ";
      for (std::size_t i = 0; i < t.domain.size(); ++i) out += (i ? ", " : "") + t.domain[i].to_string();
      out += '\n';
    }
  }
  return out;
}

DataTable::DataTable(TableDef def, std::vector<Row> rows) : def_(std::move(def)), rows_(std::move(rows)) {
  const auto keys = def_.key_indices();
  auto sample_idx = def_.sample_column ? def_.column_index(*def_.sample_column) : std::nullopt;
  key_index_.reserve(rows_.size());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    auto& row = rows_[r];
    if (row.size() != def_.columns.size())
      throw Error(Errc::MissingColumn,
                  "table '" + def_.name + "' row " + std::to_string(r) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(def_.columns.size()),
                  r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto& col = def_.columns[c];
      if (row[c].is_null()) continue;
      if (auto conv = coerce(row[c], col.type)) {
        row[c] = std::move(*conv);
      } else {
        throw Error(Errc::TypeMismatch,
                    "table '" + def_.name + "' row " + std::to_string(r) + " column '" + col.name +
                        "': expected " + std::string(type_name(col.type)),
                    r, c);
      }
      if (row[c].is_real() && !std::isfinite(row[c].as_real()))
        throw Error(Errc::TypeMismatch,
                    "table '" + def_.name + "' row " + std::to_string(r) + " column '" + col.name +
                        "': non-finite real",
                    r, c);
    }
    std::vector<Value> key;
    key.reserve(keys.size());
    for (auto k : keys) {
      if (row[k].is_null())
        throw Error(Errc::TypeMismatch,
                    "table '" + def_.name + "' row " + std::to_string(r) + " column '" +
                        def_.columns[k].name + "': null key",
                    r, k);
      key.push_back(row[k]);
    }
    if (!key_index_.emplace(std::move(key), r).second)
      throw Error(Errc::DuplicateKey, "table '" + def_.name + "' row " + std::to_string(r) + ": duplicate key",
                  r);
    if (sample_idx) {
      auto [it, inserted] = sample_index_.try_emplace(row[*sample_idx]);
      if (inserted) sample_order_.push_back(row[*sample_idx]);
      it->second.push_back(static_cast<std::uint32_t>(r));
    }
  }
}

std::optional<std::size_t> DataTable::find_key(const std::vector<Value>& key) const {
  auto it = key_index_.find(key);
  if (it == key_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint32_t> DataTable::rows_for_sample(const Value& sample) const {
  auto it = sample_index_.find(sample);
  if (it == sample_index_.end()) return {};
  return it->second;
}

namespace {

struct CsvField {
  std::string text;
  bool quoted = false;
};

// RFC 4180 reader. Returns records with their starting line numbers.
std::vector<std::pair<std::size_t, std::vector<CsvField>>> read_csv(std::string_view csv) {
  std::vector<std::pair<std::size_t, std::vector<CsvField>>> records;
  std::vector<CsvField> record;
  CsvField field;
  std::size_t line = 1, record_line = 1;
  bool in_quotes = false, field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field = {};
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].text.empty() && !record[0].quoted))
      records.emplace_back(record_line, std::move(record));
    record.clear();
    record_line = line;
  };
  for (std::size_t i = 0; i < csv.size(); ++i) {
    char c = csv[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < csv.size() && csv[i + 1] == '"') {
          field.text += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.text += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field.quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      ++line;
      end_record();
    } else if (c == '\r' && i + 1 < csv.size() && csv[i + 1] == '\n') {
      continue;
    } else {
      if (field.quoted) throw Error(Errc::SchemaError, "text after closing quote", line);
      field.text += c;
      field_started = true;
    }
  }
  if (in_quotes) throw Error(Errc::SchemaError, "unterminated quoted field", record_line);
  if (field_started || !record.empty()) end_record();
  return records;
}

bool needs_quotes(std::string_view s) {
  return s.empty() || s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view s, bool force_quotes) {
  if (!force_quotes && !needs_quotes(s)) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

}  // namespace

DataTable parse_table(std::string_view csv, const TableDef& def) {
  auto records = read_csv(csv);
  if (records.empty()) throw Error(Errc::MissingColumn, "table '" + def.name + "': missing header row");
  const auto& header = records.front().second;
  for (std::size_t c = 0; c < def.columns.size(); ++c) {
    if (c >= header.size() || header[c].text != def.columns[c].name) {
      bool present = std::any_of(header.begin(), header.end(),
                                 [&](const CsvField& f) { return f.text == def.columns[c].name; });
      throw Error(present ? Errc::SchemaError : Errc::MissingColumn,
                  "table '" + def.name + "': header column " + std::to_string(c) + " should be '" +
                      def.columns[c].name + "'",
                  std::nullopt, c);
    }
  }
  if (header.size() != def.columns.size())
    throw Error(Errc::SchemaError, "table '" + def.name + "': header has extra columns");
  std::vector<Row> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& fields = records[r].second;
    const std::size_t row_index = r - 1;
    if (fields.size() < def.columns.size())
      throw Error(Errc::MissingColumn,
                  "table '" + def.name + "' row " + std::to_string(row_index) + ": too few fields", row_index);
    if (fields.size() > def.columns.size())
      throw Error(Errc::SchemaError,
                  "table '" + def.name + "' row " + std::to_string(row_index) + ": too many fields", row_index);
    Row row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].text.empty() && !fields[c].quoted) {
        row.emplace_back();
        continue;
      }
      auto v = parse_as(def.columns[c].type, fields[c].text);
      if (!v)
        throw Error(Errc::TypeMismatch,
                    "table '" + def.name + "' row " + std::to_string(row_index) + " column '" +
                        def.columns[c].name + "': '" + fields[c].text + "' is not " +
                        std::string(type_name(def.columns[c].type)),
                    row_index, c);
      row.push_back(std::move(*v));
    }
    rows.push_back(std::move(row));
  }
  return DataTable(def, std::move(rows));
}

DataTable load_table(const std::filesystem::path& path, const TableDef& def) {
  return parse_table(detail::read_text_file(path), def);
}

std::string serialize_table(const DataTable& table) {
  std::string out;
  const auto& cols = table.def().columns;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    append_field(out, cols[c].name, false);
  }
  out += '\n';
  for (const auto& row : table.rows()) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (row[c].is_null()) continue;
      append_field(out, row[c].to_string(), row[c].is_text() && needs_quotes(row[c].as_text()));
    }
    out += '\n';
  }
  return out;
}

void save_table(const std::filesystem::path& path, const DataTable& table) {
  detail::write_text_file(path, serialize_table(table));
}

std::vector<Row> select(const DataTable& table, const std::vector<Condition>& conditions) {
  const auto& def = table.def();
  std::vector<std::pair<std::size_t, Value>> resolved;
  for (const auto& [column, value] : conditions) {
    auto idx = def.column_index(column);
    if (!idx) throw Error(Errc::UnknownColumn, "table '" + def.name + "' has no column '" + column + "'");
    auto v = coerce(value, def.columns[*idx].type);
    resolved.emplace_back(*idx, v ? *v : value);
  }
  auto matches = [&](const Row& row) {
    return std::all_of(resolved.begin(), resolved.end(),
                       [&](const auto& cond) { return row[cond.first] == cond.second; });
  };
  std::vector<Row> out;
  // Full-key conditions go through the hash index.
  const auto keys = def.key_indices();
  if (resolved.size() >= keys.size() && !keys.empty()) {
    std::vector<Value> key;
    for (auto k : keys) {
      auto it = std::find_if(resolved.begin(), resolved.end(), [&](const auto& c) { return c.first == k; });
      if (it == resolved.end()) break;
      key.push_back(it->second);
    }
    if (key.size() == keys.size()) {
      if (auto r = table.find_key(key); r && matches(table.row(*r))) out.push_back(table.row(*r));
      return out;
    }
  }
  for (const auto& row : table.rows())
    if (matches(row)) out.push_back(row);
  return out;
}

const ColumnStats* TableStats::column(std::string_view name) const noexcept {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

TableStats table_stats(const DataTable& table) {
  TableStats stats;
  stats.row_count = table.size();
  const auto& def = table.def();
  for (std::size_t c = 0; c < def.columns.size(); ++c) {
    ColumnStats cs{def.columns[c].name, 0, 0, 0};
    std::unordered_set<Value, ValueHash> seen;
    for (const auto& row : table.rows()) {
      if (row[c].is_null()) {
        ++cs.nulls;
        continue;
      }
      seen.insert(row[c]);
      if (row[c].is_boolean() && row[c].as_boolean()) ++cs.true_count;
    }
    cs.distinct = seen.size();
    stats.columns.push_back(std::move(cs));
  }
  if (def.sample_column && def.value_column && def.role == VariableRole::Boolean) {
    std::size_t samples = table.samples().size();
    if (samples > 0)
      stats.positives_per_sample =
          static_cast<double>(stats.column(*def.value_column)->true_count) / static_cast<double>(samples);
  }
  return stats;
}

Database Database::load(const std::filesystem::path& dir) {
  Database db(load_schema(dir / kSchemaFileName));
  for (const auto& def : db.schema_.tables)
    db.tables_.emplace(def.name, load_table(dir / def.file_name(), def));
  return db;
}

void Database::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  detail::write_text_file(dir / kSchemaFileName, format_schema(schema_));
  for (const auto& def : schema_.tables)
    if (auto t = find(def.name)) save_table(dir / def.file_name(), *t);
}

const DataTable* Database::find(std::string_view name) const noexcept {
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : &it->second;
}

const DataTable& Database::table(std::string_view name) const {
  if (auto t = find(name)) return *t;
  throw Error(Errc::SchemaError, "no table '" + std::string(name) + "'");
}

void Database::put(DataTable table) {
  const auto name = table.def().name;
  bool known = false;
  for (auto& def : schema_.tables) {
    if (def.name == name) {
      def = table.def();
      known = true;
    }
  }
  if (!known) schema_.tables.push_back(table.def());
  schema_.validate();
  tables_.insert_or_assign(name, std::move(table));
}

}  // namespace kbc
