#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace wws::stl {

enum class Relation { Ge, Le, Gt, Lt };

inline bool is_strict(Relation r) { return r == Relation::Gt || r == Relation::Lt; }
const char* to_string(Relation r);

struct LinearTerm {
  std::string channel;
  double coef = 1.0;
  bool operator==(const LinearTerm&) const = default;
};

/// sum_j coef_j * channel_j  (relation)  rhs
struct Predicate {
  std::vector<LinearTerm> terms;
  Relation rel = Relation::Ge;
  double rhs = 0.0;

  /// Signed margin: positive when the relation holds with slack. Strictness is not applied here.
  template <class Lookup>
  double margin(Lookup value_of) const {
    double lhs = 0.0;
    for (const auto& t : terms) lhs += t.coef * value_of(t.channel);
    return (rel == Relation::Ge || rel == Relation::Gt) ? lhs - rhs : rhs - lhs;
  }
  /// The complementary predicate (>= becomes <, and so on).
  Predicate negated() const;
  bool operator==(const Predicate&) const = default;
};

/// Time interval in seconds; an empty upper bound stands for `end`.
struct Interval {
  double a = 0.0;
  std::optional<double> b;
  bool operator==(const Interval&) const = default;
};

enum class Op { Predicate, Not, And, Or, Always, Eventually, Until };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Immutable STL syntax tree node. And/Or/Until are binary; unary nodes have one child.
struct Formula {
  Op op = Op::Predicate;
  Predicate pred;
  Interval interval;
  std::vector<FormulaPtr> children;

  static FormulaPtr predicate(Predicate p);
  static FormulaPtr negation(FormulaPtr f);
  static FormulaPtr conjunction(FormulaPtr l, FormulaPtr r);
  static FormulaPtr disjunction(FormulaPtr l, FormulaPtr r);
  static FormulaPtr always(Interval i, FormulaPtr f);
  static FormulaPtr eventually(Interval i, FormulaPtr f);
  static FormulaPtr until(Interval i, FormulaPtr l, FormulaPtr r);
};

/// Structural equality.
bool equal(const Formula& a, const Formula& b);

/// Canonical concrete syntax; parse(print(f)) reproduces f.
std::string print(const Formula& f);

/// Pushes negation down to predicates, flipping their relations. Negated Until is rejected.
FormulaPtr to_nnf(const FormulaPtr& f);
bool is_nnf(const Formula& f);

/// Future samples needed to evaluate f at one time point. `end` bounds resolve to end_time.
std::size_t horizon(const Formula& f, double h, std::optional<double> end_time = std::nullopt);

/// Index window {t + ceil(a/h), ..., t + floor(b/h)} relative offsets.
struct IndexWindow {
  std::size_t first = 0;
  std::size_t last = 0;
  bool empty() const { return last < first; }
};
IndexWindow window_offsets(const Interval& i, double h, std::optional<double> end_time);

/// Replaces the lower bound of the outermost temporal operator.
FormulaPtr with_start_time(const FormulaPtr& f, double a);

std::set<std::string> channels(const Formula& f);

/// Number of nodes in the tree.
std::size_t size(const Formula& f);

}  // namespace wws::stl
