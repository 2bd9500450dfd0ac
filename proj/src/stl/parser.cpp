#include <cctype>
#include <cstdlib>

#include "stlsynth/stl/formula.hpp"

namespace stlsynth::stl {

namespace {

enum class Tok : std::uint8_t {
  kIdent,
  kNumber,
  kInt,
  kAlw,
  kEv,
  kUntil,
  kNeg,
  kTrue,
  kAnd,
  kOr,
  kImplies,
  kLess,
  kGreater,
  kLParen,
  kRParen,
  kLBracket,
  kRBracket,
  kComma,
  kEnd,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  bool is_int = false;
  int line = 1, column = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else {
        ++column_;
      }
      ++pos_;
    }
    current_.line = line_;
    current_.column = column_;
    if (pos_ >= text_.size()) {
      current_.kind = Tok::kEnd;
      return;
    }
    const char c = text_[pos_];
    auto one = [&](Tok k) {
      current_.kind = k;
      current_.text = std::string(1, c);
      ++pos_;
      ++column_;
    };
    switch (c) {
      case '&': one(Tok::kAnd); return;
      case '|': one(Tok::kOr); return;
      case '!': one(Tok::kNeg); return;
      case '<': one(Tok::kLess); return;
      case '>': one(Tok::kGreater); return;
      case '(': one(Tok::kLParen); return;
      case ')': one(Tok::kRParen); return;
      case '[': one(Tok::kLBracket); return;
      case ']': one(Tok::kRBracket); return;
      case ',': one(Tok::kComma); return;
      case '-':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
          current_.kind = Tok::kImplies;
          current_.text = "->";
          pos_ += 2;
          column_ += 2;
          return;
        }
        lex_number();
        return;
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                     text_[pos_] == '_')) {
        ++pos_;
        ++column_;
      }
      current_.text = text_.substr(start, pos_ - start);
      if (current_.text == "alw") current_.kind = Tok::kAlw;
      else if (current_.text == "ev") current_.kind = Tok::kEv;
      else if (current_.text == "until") current_.kind = Tok::kUntil;
      else if (current_.text == "neg") current_.kind = Tok::kNeg;
      else if (current_.text == "true") current_.kind = Tok::kTrue;
      else current_.kind = Tok::kIdent;
      return;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", line_, column_);
  }

  void lex_number() {
    std::size_t start = pos_;
    bool is_int = true;
    if (text_[pos_] == '-') {
      ++pos_;
      ++column_;
    }
    while (pos_ < text_.size()) {
      const char d = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(d))) {
      } else if (d == '.' || d == 'e' || d == 'E' || d == '+' ||
                 (d == '-' && (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))) {
        is_int = false;
      } else {
        break;
      }
      ++pos_;
      ++column_;
    }
    const std::string s = text_.substr(start, pos_ - start);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
      throw ParseError("malformed number '" + s + "'", current_.line, current_.column);
    current_.kind = Tok::kNumber;
    current_.text = s;
    current_.number = v;
    current_.is_int = is_int;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1, column_ = 1;
  Token current_;
};

class Parser {
 public:
  Parser(const std::string& text, const ParserOptions& opts) : lex_(text), opts_(opts) {}

  FormulaPtr run() {
    FormulaPtr f = parse_implies();
    const Token& t = lex_.peek();
    if (t.kind != Tok::kEnd)
      throw ParseError("unexpected token '" + t.text + "'", t.line, t.column);
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    const Token& t = lex_.peek();
    throw ParseError(msg, t.line, t.column);
  }

  bool accept(Tok k) {
    if (lex_.peek().kind != k) return false;
    lex_.take();
    return true;
  }

  Token expect(Tok k, const char* what) {
    if (lex_.peek().kind != k) fail(std::string("expected ") + what);
    return lex_.take();
  }

  FormulaPtr parse_implies() {
    FormulaPtr lhs = parse_or();
    if (accept(Tok::kImplies)) return implies(std::move(lhs), parse_implies());
    return lhs;
  }

  FormulaPtr parse_or() {
    FormulaPtr f = parse_and();
    while (accept(Tok::kOr)) f = disj(std::move(f), parse_and());
    return f;
  }

  FormulaPtr parse_and() {
    FormulaPtr f = parse_until();
    while (accept(Tok::kAnd)) f = conj(std::move(f), parse_until());
    return f;
  }

  FormulaPtr parse_until() {
    FormulaPtr f = parse_unary();
    while (lex_.peek().kind == Tok::kUntil) {
      lex_.take();
      Interval iv = parse_optional_interval();
      f = until(std::move(f), parse_unary(), iv);
    }
    return f;
  }

  FormulaPtr parse_unary() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::kNeg:
        lex_.take();
        return negate(parse_unary());
      case Tok::kAlw: {
        lex_.take();
        Interval iv = parse_optional_interval();
        return always(parse_unary(), iv);
      }
      case Tok::kEv: {
        lex_.take();
        Interval iv = parse_optional_interval();
        return eventually(parse_unary(), iv);
      }
      default:
        return parse_primary();
    }
  }

  FormulaPtr parse_primary() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::kTrue:
        lex_.take();
        return f_true(opts_.rho_max);
      case Tok::kLParen: {
        lex_.take();
        FormulaPtr f = parse_implies();
        expect(Tok::kRParen, "')'");
        return f;
      }
      case Tok::kIdent: {
        Token name = lex_.take();
        if (accept(Tok::kGreater)) {
          Token num = expect(Tok::kNumber, "number after '>'");
          return pred(name.text, num.number);
        }
        if (accept(Tok::kLess)) {
          Token num = expect(Tok::kNumber, "number after '<'");
          // mu < c is sugar for neg(mu > c), keeping the strict-inequality
          // predicate base.
          return negate(pred(name.text, num.number));
        }
        return pred(name.text, 0.0);
      }
      default:
        fail("expected a formula");
    }
  }

  Interval parse_optional_interval() {
    if (lex_.peek().kind != Tok::kLBracket) return {};
    Token open = lex_.take();
    Token lo = expect(Tok::kNumber, "interval lower bound");
    expect(Tok::kComma, "','");
    Token hi = expect(Tok::kNumber, "interval upper bound");
    expect(Tok::kRBracket, "']'");
    if (!lo.is_int || !hi.is_int)
      throw ParseError("interval bounds must be integers (step counts)", open.line, open.column);
    const double a = lo.number, b = hi.number;
    if (a < 0 || b < 0) throw ParseError("interval bound is negative", open.line, open.column);
    if (a > b) throw ParseError("interval lower bound exceeds upper bound", open.line, open.column);
    return Interval{static_cast<int>(a), static_cast<int>(b)};
  }

  Lexer lex_;
  ParserOptions opts_;
};

}  // namespace

FormulaPtr parse(const std::string& text, const ParserOptions& opts) {
  return Parser(text, opts).run();
}

}  // namespace stlsynth::stl
