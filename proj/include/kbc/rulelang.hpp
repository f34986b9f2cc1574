#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kbc/error.hpp"
#include "kbc/value.hpp"

namespace kbc {

struct SourcePos {
  std::size_t line = 0;
  std::size_t column = 0;
};

struct Variable {
  std::string name;
  friend bool operator==(const Variable&, const Variable&) = default;
};

using Term = std::variant<Variable, Value>;

inline bool is_variable(const Term& t) noexcept { return std::holds_alternative<Variable>(t); }
inline const std::string& variable_name(const Term& t) { return std::get<Variable>(t).name; }
std::string format_term(const Term& t);

struct Literal {
  bool negated = false;
  std::string predicate;
  std::vector<Term> args;
  SourcePos pos;

  /// Structural equality; source positions are ignored.
  friend bool operator==(const Literal& a, const Literal& b) {
    return a.negated == b.negated && a.predicate == b.predicate && a.args == b.args;
  }
};

/// Constant factor value, or the name of a body variable carrying a
/// continuous feature value.
using FactorExpr = std::variant<double, Variable>;

/// A parsed rule `{(key vars), w(weight key), factor | body}`. The first key
/// variable scopes the rule to one sample.
struct RuleAst {
  std::vector<Variable> key_vars;
  std::vector<Term> weight_key;
  FactorExpr factor = 1.0;
  std::vector<Literal> body;
  SourcePos pos;

  const Variable& scope_var() const { return key_vars.front(); }

  friend bool operator==(const RuleAst& a, const RuleAst& b) {
    return a.key_vars == b.key_vars && a.weight_key == b.weight_key && a.factor == b.factor &&
           a.body == b.body;
  }
};

/// Parses exactly one rule. Throws SyntaxError (with line/column),
/// UnboundVariable, ArityMismatch.
RuleAst parse_rule(std::string_view text);

/// Parses a rule file: any number of rules, `#` comments, free layout.
std::vector<RuleAst> parse_rule_file(std::string_view text);

/// Canonical single-line text that re-parses to an equal AST.
std::string pretty_print(const RuleAst& rule);
std::string format_literal(const Literal& lit);

/// Parses a comma-separated list of constant terms, as used for weight keys
/// in weight files. An empty string yields an empty list.
std::vector<Value> parse_constant_list(std::string_view text);
std::string format_constant_list(const std::vector<Value>& values);

// Token stream shared by the rule and query parsers.
namespace lex {

enum class Tok { LBrace, RBrace, LParen, RParen, Comma, Bar, And, Bang, Arrow, Ident, String, Number, End };

struct Token {
  Tok kind;
  std::string text;
  Value value;  // String / Number payload
  SourcePos pos;
};

std::vector<Token> tokenize(std::string_view text);
std::string_view describe(Tok kind) noexcept;

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  const Token& peek(std::size_t ahead = 0) const;
  bool at(Tok kind) const { return peek().kind == kind; }
  Token take();
  Token expect(Tok kind, std::string_view context);
  bool accept(Tok kind);
  [[noreturn]] void fail(const std::string& message) const;

  Term term();
  Literal literal();
  std::vector<Term> term_list(std::string_view context);

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace lex

}  // namespace kbc
