#include "kbc/rulelang.hpp"

#include <cctype>
#include <map>
#include <set>

namespace kbc {

std::string format_term(const Term& t) {
  if (is_variable(t)) return variable_name(t);
  return std::get<Value>(t).to_literal();
}

namespace lex {

std::string_view describe(Tok kind) noexcept {
  switch (kind) {
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Bar: return "'|'";
    case Tok::And: return "'&'";
    case Tok::Bang: return "'!'";
    case Tok::Arrow: return "'=>'";
    case Tok::Ident: return "identifier";
    case Tok::String: return "string";
    case Tok::Number: return "number";
    case Tok::End: return "end of input";
  }
  return "?";
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
        ++col;
      }
      ++i;
    }
  };
  auto fail = [&](const std::string& what, SourcePos p) {
    throw Error(Errc::SyntaxError, what, p.line, p.column);
  };
  while (i < text.size()) {
    char c = text[i];
    SourcePos pos{line, col};
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    auto simple = [&](Tok k, std::size_t n) {
      out.push_back({k, std::string(text.substr(i, n)), {}, pos});
      advance(n);
    };
    switch (c) {
      case '{': simple(Tok::LBrace, 1); continue;
      case '}': simple(Tok::RBrace, 1); continue;
      case '(': simple(Tok::LParen, 1); continue;
      case ')': simple(Tok::RParen, 1); continue;
      case ',': simple(Tok::Comma, 1); continue;
      case '|': simple(Tok::Bar, 1); continue;
      case '&': simple(Tok::And, 1); continue;
      case '!': simple(Tok::Bang, 1); continue;
      default: break;
    }
    if (text.substr(i, 3) == "\xE2\x88\xA7") {  // U+2227 LOGICAL AND
      simple(Tok::And, 3);
      continue;
    }
    if (text.substr(i, 2) == "=>") {
      simple(Tok::Arrow, 2);
      continue;
    }
    if (c == '"') {
      std::string s;
      advance(1);
      while (true) {
        if (i >= text.size() || text[i] == '\n') fail("unterminated string", pos);
        if (text[i] == '"') break;
        if (text[i] == '\\') {
          advance(1);
          if (i >= text.size()) fail("unterminated string", pos);
          if (text[i] != '"' && text[i] != '\\') fail("unknown escape in string", {line, col});
        }
        s += text[i];
        advance(1);
      }
      advance(1);
      out.push_back({Tok::String, s, Value(s), pos});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      std::size_t j = i;
      if (text[j] == '-' || text[j] == '+') ++j;
      bool digits = false, real = false;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j, digits = true;
      if (j < text.size() && text[j] == '.') {
        real = true;
        ++j;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j, digits = true;
      }
      if (digits && j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          real = true;
          j = k;
          while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        }
      }
      if (!digits) fail("unexpected character '" + std::string(1, c) + "'", pos);
      auto lexeme = text.substr(i, j - i);
      Value v;
      if (real) {
        auto d = parse_real(lexeme);
        if (!d) fail("bad number '" + std::string(lexeme) + "'", pos);
        v = Value(*d);
      } else {
        auto n = parse_integer(lexeme);
        if (!n) fail("integer out of range '" + std::string(lexeme) + "'", pos);
        v = Value(*n);
      }
      out.push_back({Tok::Number, std::string(lexeme), v, pos});
      advance(j - i);
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      out.push_back({Tok::Ident, std::string(text.substr(i, j - i)), {}, pos});
      advance(j - i);
      continue;
    }
    fail("unexpected character '" + std::string(1, c) + "'", pos);
  }
  out.push_back({Tok::End, "", {}, {line, col}});
  return out;
}

const Token& Parser::peek(std::size_t ahead) const {
  return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
}

Token Parser::take() {
  Token t = peek();
  if (pos_ < toks_.size() - 1) ++pos_;
  return t;
}

bool Parser::accept(Tok kind) {
  if (!at(kind)) return false;
  take();
  return true;
}

void Parser::fail(const std::string& message) const {
  const auto& t = peek();
  std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
  throw Error(Errc::SyntaxError, message + ", found " + found, t.pos.line, t.pos.column);
}

Token Parser::expect(Tok kind, std::string_view context) {
  if (!at(kind)) fail("expected " + std::string(describe(kind)) + " " + std::string(context));
  return take();
}

Term Parser::term() {
  const auto& t = peek();
  if (t.kind == Tok::Ident) return Variable{take().text};
  if (t.kind == Tok::String || t.kind == Tok::Number) return take().value;
  fail("expected a variable or constant");
}

std::vector<Term> Parser::term_list(std::string_view context) {
  std::vector<Term> out;
  out.push_back(term());
  while (accept(Tok::Comma)) out.push_back(term());
  expect(Tok::RParen, context);
  return out;
}

Literal Parser::literal() {
  Literal lit;
  lit.pos = peek().pos;
  lit.negated = accept(Tok::Bang);
  lit.predicate = expect(Tok::Ident, "for a predicate name").text;
  expect(Tok::LParen, "after predicate '" + lit.predicate + "'");
  lit.args = term_list("to close literal '" + lit.predicate + "'");
  return lit;
}

}  // namespace lex

namespace {

using lex::Tok;

void check_rule(const RuleAst& rule) {
  std::set<std::string> bound;
  std::map<std::string, std::size_t> arity;
  for (const auto& lit : rule.body) {
    auto [it, fresh] = arity.emplace(lit.predicate, lit.args.size());
    if (!fresh && it->second != lit.args.size())
      throw Error(Errc::ArityMismatch,
                  "predicate '" + lit.predicate + "' used with " + std::to_string(it->second) + " and " +
                      std::to_string(lit.args.size()) + " arguments",
                  lit.pos.line, lit.pos.column);
    for (const auto& a : lit.args)
      if (is_variable(a)) bound.insert(variable_name(a));
  }
  auto need = [&](const std::string& name, const char* where) {
    if (!bound.count(name))
      throw Error(Errc::UnboundVariable, "variable '" + name + "' in " + where + " does not appear in the body",
                  rule.pos.line, rule.pos.column);
  };
  for (const auto& v : rule.key_vars) need(v.name, "the key tuple");
  for (const auto& t : rule.weight_key)
    if (is_variable(t)) need(variable_name(t), "the weight key");
  if (auto* v = std::get_if<Variable>(&rule.factor)) need(v->name, "the factor expression");
}

RuleAst parse_one(lex::Parser& p) {
  RuleAst rule;
  rule.pos = p.peek().pos;
  p.expect(Tok::LBrace, "to open a rule");
  p.expect(Tok::LParen, "to open the rule head");
  if (p.accept(Tok::LParen)) {
    do {
      rule.key_vars.push_back({p.expect(Tok::Ident, "in key tuple").text});
    } while (p.accept(Tok::Comma));
    p.expect(Tok::RParen, "to close the key tuple");
  } else {
    rule.key_vars.push_back({p.expect(Tok::Ident, "as key variable").text});
  }
  p.expect(Tok::Comma, "after the key tuple");
  auto w = p.expect(Tok::Ident, "for the weight function");
  if (w.text != "w")
    throw Error(Errc::SyntaxError, "expected weight function 'w', found '" + w.text + "'", w.pos.line, w.pos.column);
  p.expect(Tok::LParen, "after 'w'");
  if (!p.accept(Tok::RParen)) rule.weight_key = p.term_list("to close the weight key");
  p.expect(Tok::Comma, "after the weight key");
  if (p.at(Tok::Number)) {
    rule.factor = p.take().value.as_number();
  } else if (p.at(Tok::Ident)) {
    rule.factor = Variable{p.take().text};
  } else {
    p.fail("expected a number or variable as factor expression");
  }
  p.expect(Tok::RParen, "to close the rule head");
  p.expect(Tok::Bar, "between head and body");
  rule.body.push_back(p.literal());
  while (p.accept(Tok::And)) rule.body.push_back(p.literal());
  p.expect(Tok::RBrace, "to close the rule");
  check_rule(rule);
  return rule;
}

}  // namespace

RuleAst parse_rule(std::string_view text) {
  lex::Parser p(lex::tokenize(text));
  auto rule = parse_one(p);
  if (!p.at(Tok::End)) p.fail("expected end of rule");
  return rule;
}

std::vector<RuleAst> parse_rule_file(std::string_view text) {
  lex::Parser p(lex::tokenize(text));
  std::vector<RuleAst> rules;
  while (!p.at(Tok::End)) rules.push_back(parse_one(p));
  return rules;
}

std::string format_literal(const Literal& lit) {
  std::string out = lit.negated ? "!" : "";
  out += lit.predicate + "(";
  for (std::size_t i = 0; i < lit.args.size(); ++i) {
    if (i) out += ", ";
    out += format_term(lit.args[i]);
  }
  return out + ")";
}

std::string pretty_print(const RuleAst& rule) {
  std::string out = "{(";
  if (rule.key_vars.size() == 1) {
    out += rule.key_vars[0].name;
  } else {
    out += "(";
    for (std::size_t i = 0; i < rule.key_vars.size(); ++i) {
      if (i) out += ", ";
      out += rule.key_vars[i].name;
    }
    out += ")";
  }
  out += ", w(";
  for (std::size_t i = 0; i < rule.weight_key.size(); ++i) {
    if (i) out += ", ";
    out += format_term(rule.weight_key[i]);
  }
  out += "), ";
  if (auto* c = std::get_if<double>(&rule.factor)) {
    out += format_real(*c);
  } else {
    out += std::get<Variable>(rule.factor).name;
  }
  out += ") | ";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    if (i) out += " & ";
    out += format_literal(rule.body[i]);
  }
  return out + "}";
}

std::vector<Value> parse_constant_list(std::string_view text) {
  lex::Parser p(lex::tokenize(text));
  std::vector<Value> out;
  if (p.at(Tok::End)) return out;
  do {
    if (p.at(Tok::Ident) && (p.peek().text == "true" || p.peek().text == "false")) {
      out.emplace_back(p.take().text == "true");
      continue;
    }
    if (!p.at(Tok::String) && !p.at(Tok::Number)) p.fail("expected a constant");
    out.push_back(p.take().value);
  } while (p.accept(Tok::Comma));
  if (!p.at(Tok::End)) p.fail("expected ','");
  return out;
}

std::string format_constant_list(const std::vector<Value>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += values[i].to_literal();
  }
  return out;
}

}  // namespace kbc
