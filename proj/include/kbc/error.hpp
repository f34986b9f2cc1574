#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kbc {

enum class Errc {
  InvalidArgument,
  IoError,
  SchemaError,
  MissingColumn,
  TypeMismatch,
  DuplicateKey,
  UnknownColumn,
  SyntaxError,
  UnboundVariable,
  ArityMismatch,
  UnknownPredicate,
  DomainUnresolvable,
  DomainExplosion,
  UnassignedVariable,
  TooLargeToEnumerate,
  ObservedVariable,
  NonFiniteWeight,
  UnboundAnswerVariable,
  UnknownSample,
  UnknownFamily,
  HashMismatch,
  VersionMismatch,
  InvalidSize,
};

std::string_view errc_name(Errc code) noexcept;

/// Coarse failure class, used by the command line tool to pick exit codes.
enum class ErrorClass { Usage, Data, Numerical };

ErrorClass error_class(Errc code) noexcept;

/// All library failures are reported through this exception. `line` and
/// `column` carry a 1-based source position for parse errors and a 0-based
/// row index / column name position for table errors.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt,
        std::optional<std::size_t> column = std::nullopt);

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  std::optional<std::size_t> column() const noexcept { return column_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
  std::optional<std::size_t> column_;
};

}  // namespace kbc
