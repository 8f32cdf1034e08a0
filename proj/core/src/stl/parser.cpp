#include "wws/stl/parser.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "wws/error.hpp"

namespace wws::stl {
namespace {

enum class Tok { Ident, Number, LParen, RParen, LBracket, RBracket, Comma, Star, Plus, Minus, Rel, End };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
      if (i_ >= s_.size()) {
        out.push_back({Tok::End, {}, i_});
        return out;
      }
      const std::size_t start = i_;
      const char c = s_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
        out.push_back({Tok::Ident, s_.substr(start, i_ - start), start});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        double v;
        const auto res = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
        if (res.ec != std::errc()) throw ParseError("malformed number", start);
        i_ = static_cast<std::size_t>(res.ptr - s_.data());
        out.push_back({Tok::Number, s_.substr(start, i_ - start), start});
      } else if (c == '>' || c == '<') {
        ++i_;
        if (i_ < s_.size() && s_[i_] == '=') ++i_;
        out.push_back({Tok::Rel, s_.substr(start, i_ - start), start});
      } else {
        Tok k;
        switch (c) {
          case '(': k = Tok::LParen; break;
          case ')': k = Tok::RParen; break;
          case '[': k = Tok::LBracket; break;
          case ']': k = Tok::RBracket; break;
          case ',': k = Tok::Comma; break;
          case '*': k = Tok::Star; break;
          case '+': k = Tok::Plus; break;
          case '-': k = Tok::Minus; break;
          default: throw ParseError(std::string("unexpected character '") + c + "'", start);
        }
        ++i_;
        out.push_back({k, s_.substr(start, 1), start});
      }
    }
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

bool is_keyword(std::string_view w) {
  return w == "and" || w == "or" || w == "not" || w == "alw_" || w == "ev_" || w == "until_" || w == "end";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(Lexer(text).run()) {}

  FormulaPtr run() {
    FormulaPtr f = disjunction();
    if (peek().kind != Tok::End) fail("unexpected trailing input");
    return f;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& take() { return toks_[i_++]; }
  bool at_word(std::string_view w) const { return peek().kind == Tok::Ident && peek().text == w; }
  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = peek();
    throw ParseError(msg + (t.kind == Tok::End ? " (end of input)" : " near '" + std::string(t.text) + "'"), t.pos);
  }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what);
    ++i_;
  }

  FormulaPtr disjunction() {
    FormulaPtr f = conjunction();
    while (at_word("or")) {
      ++i_;
      f = Formula::disjunction(f, conjunction());
    }
    return f;
  }

  FormulaPtr conjunction() {
    FormulaPtr f = until();
    while (at_word("and")) {
      ++i_;
      f = Formula::conjunction(f, until());
    }
    return f;
  }

  FormulaPtr until() {
    FormulaPtr f = unary();
    while (at_word("until_")) {
      ++i_;
      const Interval iv = interval();
      f = Formula::until(iv, f, unary());
    }
    return f;
  }

  FormulaPtr unary() {
    if (at_word("not")) {
      ++i_;
      return Formula::negation(unary());
    }
    if (at_word("alw_")) {
      ++i_;
      const Interval iv = interval();
      return Formula::always(iv, unary());
    }
    if (at_word("ev_")) {
      ++i_;
      const Interval iv = interval();
      return Formula::eventually(iv, unary());
    }
    if (peek().kind == Tok::LParen) {
      ++i_;
      FormulaPtr f = disjunction();
      expect(Tok::RParen, "')'");
      return f;
    }
    return atom();
  }

  double number() {
    bool neg = false;
    if (peek().kind == Tok::Minus || peek().kind == Tok::Plus) neg = take().kind == Tok::Minus;
    if (peek().kind != Tok::Number) fail("expected number");
    const auto& t = take();
    double v;
    std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    return neg ? -v : v;
  }

  Interval interval() {
    const std::size_t pos = peek().pos;
    expect(Tok::LBracket, "'['");
    Interval iv;
    iv.a = number();
    expect(Tok::Comma, "','");
    if (at_word("end")) {
      ++i_;
    } else {
      iv.b = number();
    }
    expect(Tok::RBracket, "']'");
    if (iv.a < 0.0 || (iv.b && *iv.b < iv.a)) throw ParseError("invalid interval bounds", pos);
    return iv;
  }

  LinearTerm term() {
    double sign = 1.0;
    if (peek().kind == Tok::Minus || peek().kind == Tok::Plus) sign = take().kind == Tok::Minus ? -1.0 : 1.0;
    LinearTerm t;
    if (peek().kind == Tok::Number) {
      t.coef = sign * number();
      expect(Tok::Star, "'*'");
    } else {
      t.coef = sign;
    }
    if (peek().kind != Tok::Ident || is_keyword(peek().text)) fail("expected channel name");
    t.channel = std::string(take().text);
    return t;
  }

  FormulaPtr atom() {
    Predicate p;
    p.terms.push_back(term());
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      if (toks_[i_].kind == Tok::Minus) {
        ++i_;
        LinearTerm t = term();
        t.coef = -t.coef;
        p.terms.push_back(std::move(t));
      } else {
        ++i_;
        p.terms.push_back(term());
      }
    }
    if (peek().kind != Tok::Rel) fail("expected relation");
    const auto rel = take().text;
    p.rel = rel == ">=" ? Relation::Ge : rel == "<=" ? Relation::Le : rel == ">" ? Relation::Gt : Relation::Lt;
    p.rhs = number();
    return Formula::predicate(std::move(p));
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

}  // namespace

FormulaPtr parse(std::string_view text) { return Parser(text).run(); }

std::vector<FormulaPtr> parse_spec(std::string_view text) {
  std::vector<FormulaPtr> out;
  std::size_t offset = 0;
  while (offset <= text.size()) {
    const std::size_t nl = text.find('\n', offset);
    std::string_view line = text.substr(offset, nl == std::string_view::npos ? std::string_view::npos : nl - offset);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        out.push_back(parse(line));
      } catch (const ParseError& e) {
        throw ParseError("in specification line '" + std::string(line) + "'", offset + e.position());
      }
    }
    if (nl == std::string_view::npos) break;
    offset = nl + 1;
  }
  return out;
}

std::vector<FormulaPtr> load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open specification file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

}  // namespace wws::stl
