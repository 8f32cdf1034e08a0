#include "wws/stl/formula.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "wws/error.hpp"

namespace wws::stl {
namespace {

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

FormulaPtr make(Op op, std::vector<FormulaPtr> children, Interval i = {}) {
  for (const auto& c : children) {
    if (!c) throw StlError("null subformula");
  }
  auto f = std::make_shared<Formula>();
  f->op = op;
  f->children = std::move(children);
  f->interval = i;
  return f;
}

void check_interval(const Interval& i) {
  if (!(i.a >= 0.0) || !std::isfinite(i.a)) throw StlError("interval lower bound must be finite and >= 0");
  if (i.b && (!std::isfinite(*i.b) || *i.b < i.a)) throw StlError("interval upper bound must be >= lower bound");
}

std::string print_interval(const Interval& i) {
  return "[" + number(i.a) + "," + (i.b ? number(*i.b) : std::string("end")) + "]";
}

std::size_t ceil_steps(double v, double h) {
  const double q = v / h;
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(q));
}

std::size_t floor_steps(double v, double h) {
  const double q = v / h;
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::floor(q));
}

}  // namespace

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Ge: return ">=";
    case Relation::Le: return "<=";
    case Relation::Gt: return ">";
    case Relation::Lt: return "<";
  }
  return "?";
}

Predicate Predicate::negated() const {
  Predicate p = *this;
  switch (rel) {
    case Relation::Ge: p.rel = Relation::Lt; break;
    case Relation::Le: p.rel = Relation::Gt; break;
    case Relation::Gt: p.rel = Relation::Le; break;
    case Relation::Lt: p.rel = Relation::Ge; break;
  }
  return p;
}

FormulaPtr Formula::predicate(Predicate p) {
  if (p.terms.empty()) throw StlError("predicate without channels");
  auto f = std::make_shared<Formula>();
  f->op = Op::Predicate;
  f->pred = std::move(p);
  return f;
}
FormulaPtr Formula::negation(FormulaPtr f) { return make(Op::Not, {std::move(f)}); }
FormulaPtr Formula::conjunction(FormulaPtr l, FormulaPtr r) { return make(Op::And, {std::move(l), std::move(r)}); }
FormulaPtr Formula::disjunction(FormulaPtr l, FormulaPtr r) { return make(Op::Or, {std::move(l), std::move(r)}); }
FormulaPtr Formula::always(Interval i, FormulaPtr f) {
  check_interval(i);
  return make(Op::Always, {std::move(f)}, i);
}
FormulaPtr Formula::eventually(Interval i, FormulaPtr f) {
  check_interval(i);
  return make(Op::Eventually, {std::move(f)}, i);
}
FormulaPtr Formula::until(Interval i, FormulaPtr l, FormulaPtr r) {
  check_interval(i);
  return make(Op::Until, {std::move(l), std::move(r)}, i);
}

bool equal(const Formula& a, const Formula& b) {
  if (a.op != b.op || a.children.size() != b.children.size()) return false;
  if (a.op == Op::Predicate) return a.pred == b.pred;
  if ((a.op == Op::Always || a.op == Op::Eventually || a.op == Op::Until) && !(a.interval == b.interval)) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

std::string print(const Formula& f) {
  const auto child = [&](std::size_t i) { return "(" + print(*f.children[i]) + ")"; };
  switch (f.op) {
    case Op::Predicate: {
      std::string s;
      for (std::size_t i = 0; i < f.pred.terms.size(); ++i) {
        const auto& t = f.pred.terms[i];
        if (i > 0) s += " + ";
        if (t.coef != 1.0) s += number(t.coef) + "*";
        s += t.channel;
      }
      return s + " " + to_string(f.pred.rel) + " " + number(f.pred.rhs);
    }
    case Op::Not: return "not " + child(0);
    case Op::And: return child(0) + " and " + child(1);
    case Op::Or: return child(0) + " or " + child(1);
    case Op::Always: return "alw_" + print_interval(f.interval) + " " + child(0);
    case Op::Eventually: return "ev_" + print_interval(f.interval) + " " + child(0);
    case Op::Until: return child(0) + " until_" + print_interval(f.interval) + " " + child(1);
  }
  return {};
}

namespace {

FormulaPtr nnf(const FormulaPtr& f, bool negate) {
  switch (f->op) {
    case Op::Predicate:
      return negate ? Formula::predicate(f->pred.negated()) : f;
    case Op::Not:
      return nnf(f->children[0], !negate);
    case Op::And: {
      auto l = nnf(f->children[0], negate), r = nnf(f->children[1], negate);
      return negate ? Formula::disjunction(l, r) : Formula::conjunction(l, r);
    }
    case Op::Or: {
      auto l = nnf(f->children[0], negate), r = nnf(f->children[1], negate);
      return negate ? Formula::conjunction(l, r) : Formula::disjunction(l, r);
    }
    case Op::Always: {
      auto c = nnf(f->children[0], negate);
      return negate ? Formula::eventually(f->interval, c) : Formula::always(f->interval, c);
    }
    case Op::Eventually: {
      auto c = nnf(f->children[0], negate);
      return negate ? Formula::always(f->interval, c) : Formula::eventually(f->interval, c);
    }
    case Op::Until:
      if (negate) throw StlError("negated until is not supported in negation normal form");
      return Formula::until(f->interval, nnf(f->children[0], false), nnf(f->children[1], false));
  }
  return f;
}

}  // namespace

FormulaPtr to_nnf(const FormulaPtr& f) { return nnf(f, false); }

bool is_nnf(const Formula& f) {
  if (f.op == Op::Not) return false;
  return std::all_of(f.children.begin(), f.children.end(), [](const FormulaPtr& c) { return is_nnf(*c); });
}

IndexWindow window_offsets(const Interval& i, double h, std::optional<double> end_time) {
  if (!(h > 0.0)) throw StlError("sampling period must be positive");
  double b;
  if (i.b) {
    b = *i.b;
  } else if (end_time) {
    b = *end_time;
  } else {
    throw StlError("unbounded interval: `end` has not been resolved");
  }
  IndexWindow w;
  w.first = ceil_steps(i.a, h);
  if (b < i.a) {
    w.last = 0;
    w.first = 1;
    return w;
  }
  w.last = floor_steps(b, h);
  return w;
}

std::size_t horizon(const Formula& f, double h, std::optional<double> end_time) {
  switch (f.op) {
    case Op::Predicate:
      return 0;
    case Op::Not:
      return horizon(*f.children[0], h, end_time);
    case Op::And:
    case Op::Or:
      return std::max(horizon(*f.children[0], h, end_time), horizon(*f.children[1], h, end_time));
    case Op::Always:
    case Op::Eventually:
    case Op::Until: {
      double b;
      if (f.interval.b) {
        b = *f.interval.b;
      } else if (end_time) {
        b = *end_time;
      } else {
        throw StlError("unbounded interval: `end` has not been resolved");
      }
      std::size_t child = 0;
      for (const auto& c : f.children) child = std::max(child, horizon(*c, h, end_time));
      return ceil_steps(b, h) + child;
    }
  }
  return 0;
}

FormulaPtr with_start_time(const FormulaPtr& f, double a) {
  switch (f->op) {
    case Op::Always:
      return Formula::always({a, f->interval.b}, f->children[0]);
    case Op::Eventually:
      return Formula::eventually({a, f->interval.b}, f->children[0]);
    case Op::Until:
      return Formula::until({a, f->interval.b}, f->children[0], f->children[1]);
    default:
      throw StlError("formula has no outermost temporal operator");
  }
}

std::set<std::string> channels(const Formula& f) {
  std::set<std::string> out;
  if (f.op == Op::Predicate) {
    for (const auto& t : f.pred.terms) out.insert(t.channel);
  }
  for (const auto& c : f.children) {
    auto sub = channels(*c);
    out.insert(sub.begin(), sub.end());
  }
  return out;
}

std::size_t size(const Formula& f) {
  std::size_t n = 1;
  for (const auto& c : f.children) n += size(*c);
  return n;
}

}  // namespace wws::stl
