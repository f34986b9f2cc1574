#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kbc {

enum class ValueType { Integer, Real, Text, Boolean };

std::string_view type_name(ValueType type) noexcept;
std::optional<ValueType> parse_type_name(std::string_view name) noexcept;

/// A single cell. Null only appears in non-key table columns (an empty CSV
/// field) and marks an unobserved value.
class Value {
 public:
  Value() = default;
  Value(std::int64_t v) : v_(v) {}
  Value(int v) : v_(static_cast<std::int64_t>(v)) {}
  Value(double v) : v_(v) {}
  Value(std::string v) : v_(std::move(v)) {}
  Value(const char* v) : v_(std::string(v)) {}
  Value(bool v) : v_(v) {}

  static Value null() { return {}; }

  bool is_null() const noexcept { return v_.index() == 0; }
  std::optional<ValueType> type() const noexcept;

  bool is_integer() const noexcept { return std::holds_alternative<std::int64_t>(v_); }
  bool is_real() const noexcept { return std::holds_alternative<double>(v_); }
  bool is_text() const noexcept { return std::holds_alternative<std::string>(v_); }
  bool is_boolean() const noexcept { return std::holds_alternative<bool>(v_); }
  bool is_number() const noexcept { return is_integer() || is_real(); }

  std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
  double as_real() const { return std::get<double>(v_); }
  const std::string& as_text() const { return std::get<std::string>(v_); }
  bool as_boolean() const { return std::get<bool>(v_); }
  /// Integer or real widened to double.
  double as_number() const;

  /// Total order: null < integer < real < text < boolean, then by value.
  friend bool operator==(const Value& a, const Value& b) noexcept { return a.v_ == b.v_; }
  friend bool operator<(const Value& a, const Value& b) noexcept { return a.v_ < b.v_; }
  friend bool operator!=(const Value& a, const Value& b) noexcept { return !(a == b); }
  friend bool operator>(const Value& a, const Value& b) noexcept { return b < a; }
  friend bool operator<=(const Value& a, const Value& b) noexcept { return !(b < a); }
  friend bool operator>=(const Value& a, const Value& b) noexcept { return !(a < b); }

  std::size_t hash() const noexcept;

  /// Unquoted display form (text as-is, reals in shortest round-trip form).
  std::string to_string() const;
  /// Literal form used by the rule and query languages: text is double
  /// quoted with `\"` and `\\` escapes, reals always carry a '.' or exponent.
  std::string to_literal() const;

 private:
  std::variant<std::monostate, std::int64_t, double, std::string, bool> v_;
};

using Row = std::vector<Value>;

struct ValueHash {
  std::size_t operator()(const Value& v) const noexcept { return v.hash(); }
};

struct RowHash {
  std::size_t operator()(const std::vector<Value>& row) const noexcept;
};

std::string format_real(double v);
std::optional<double> parse_real(std::string_view text) noexcept;
std::optional<std::int64_t> parse_integer(std::string_view text) noexcept;

/// Interprets `text` as a value of `type`; nullopt when it does not parse.
/// Reals must be finite.
std::optional<Value> parse_as(ValueType type, std::string_view text) noexcept;

/// Converts `v` to `type` when that is lossless (integer -> real, or the same
/// type); nullopt otherwise.
std::optional<Value> coerce(const Value& v, ValueType type);

}  // namespace kbc
