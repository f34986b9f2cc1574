#include "kbc/value.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "kbc/error.hpp"

namespace kbc {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::TypeMismatch: return "TypeMismatch";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::UnknownColumn: return "UnknownColumn";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnboundVariable: return "UnboundVariable";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::UnknownPredicate: return "UnknownPredicate";
    case Errc::DomainUnresolvable: return "DomainUnresolvable";
    case Errc::DomainExplosion: return "DomainExplosion";
    case Errc::UnassignedVariable: return "UnassignedVariable";
    case Errc::TooLargeToEnumerate: return "TooLargeToEnumerate";
    case Errc::ObservedVariable: return "ObservedVariable";
    case Errc::NonFiniteWeight: return "NonFiniteWeight";
    case Errc::UnboundAnswerVariable: return "UnboundAnswerVariable";
    case Errc::UnknownSample: return "UnknownSample";
    case Errc::UnknownFamily: return "UnknownFamily";
    case Errc::HashMismatch: return "HashMismatch";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::InvalidSize: return "InvalidSize";
  }
  return "Unknown";
}

ErrorClass error_class(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::InvalidSize:
      return ErrorClass::Usage;
    case Errc::NonFiniteWeight:
    case Errc::TooLargeToEnumerate:
      return ErrorClass::Numerical;
    default:
      return ErrorClass::Data;
  }
}

namespace {

std::string describe(Errc code, const std::string& message, std::optional<std::size_t> line,
                     std::optional<std::size_t> column) {
  std::string out(errc_name(code));
  if (line) {
    out += " at " + std::to_string(*line);
    if (column) out += ":" + std::to_string(*column);
  }
  out += ": " + message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> line,
             std::optional<std::size_t> column)
    : std::runtime_error(describe(code, message, line, column)),
      code_(code),
      line_(line),
      column_(column) {}

std::string_view type_name(ValueType type) noexcept {
  switch (type) {
    case ValueType::Integer: return "integer";
    case ValueType::Real: return "real";
    case ValueType::Text: return "text";
    case ValueType::Boolean: return "boolean";
  }
  return "?";
}

std::optional<ValueType> parse_type_name(std::string_view name) noexcept {
  if (name == "integer" || name == "bigint" || name == "int") return ValueType::Integer;
  if (name == "real" || name == "double") return ValueType::Real;
  if (name == "text") return ValueType::Text;
  if (name == "boolean" || name == "bool") return ValueType::Boolean;
  return std::nullopt;
}

std::optional<ValueType> Value::type() const noexcept {
  switch (v_.index()) {
    case 1: return ValueType::Integer;
    case 2: return ValueType::Real;
    case 3: return ValueType::Text;
    case 4: return ValueType::Boolean;
    default: return std::nullopt;
  }
}

double Value::as_number() const {
  if (is_integer()) return static_cast<double>(as_integer());
  return as_real();
}

std::size_t Value::hash() const noexcept {
  std::size_t h = v_.index() * 0x9e3779b97f4a7c15ULL;
  switch (v_.index()) {
    case 1: h ^= std::hash<std::int64_t>{}(std::get<1>(v_)); break;
    case 2: h ^= std::hash<double>{}(std::get<2>(v_)); break;
    case 3: h ^= std::hash<std::string>{}(std::get<3>(v_)); break;
    case 4: h ^= std::get<4>(v_) ? 0x51ed27ULL : 0x2b3c1ULL; break;
    default: break;
  }
  return h * 0xff51afd7ed558ccdULL;
}

std::size_t RowHash::operator()(const std::vector<Value>& row) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (const auto& v : row) h = (h ^ v.hash()) * 0x100000001b3ULL;
  return h;
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_real(std::string_view text) noexcept {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_integer(std::string_view text) noexcept {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  std::int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::optional<Value> parse_as(ValueType type, std::string_view text) noexcept {
  switch (type) {
    case ValueType::Integer:
      if (auto v = parse_integer(text)) return Value(*v);
      return std::nullopt;
    case ValueType::Real:
      if (auto v = parse_real(text); v && std::isfinite(*v)) return Value(*v);
      return std::nullopt;
    case ValueType::Text:
      return Value(std::string(text));
    case ValueType::Boolean:
      if (text == "true") return Value(true);
      if (text == "false") return Value(false);
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<Value> coerce(const Value& v, ValueType type) {
  if (v.type() == type) return v;
  if (type == ValueType::Real && v.is_integer()) return Value(static_cast<double>(v.as_integer()));
  return std::nullopt;
}

std::string Value::to_string() const {
  switch (v_.index()) {
    case 1: return std::to_string(std::get<1>(v_));
    case 2: return format_real(std::get<2>(v_));
    case 3: return std::get<3>(v_);
    case 4: return std::get<4>(v_) ? "true" : "false";
    default: return "";
  }
}

std::string Value::to_literal() const {
  switch (v_.index()) {
    case 2: {
      std::string s = format_real(std::get<2>(v_));
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    case 3: {
      std::string out = "\"";
      for (char c : std::get<3>(v_)) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
      return out;
    }
    default:
      return to_string();
  }
}

}  // namespace kbc
