#include "wws/stl/monitor.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "wws/error.hpp"

namespace wws::stl {

std::size_t SampledSignal::length() const {
  std::optional<std::size_t> n;
  for (const auto& [name, v] : channels) {
    if (n && *n != v.size()) throw StlError("signal channels have different lengths (channel " + name + ")");
    n = v.size();
  }
  return n.value_or(0);
}

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// nullopt marks "no observed sample"; it is the identity for both min and max.
using Value = std::optional<double>;

Value combine_min(Value a, Value b) {
  if (!a) return b;
  if (!b) return a;
  return std::min(*a, *b);
}

Value combine_max(Value a, Value b) {
  if (!a) return b;
  if (!b) return a;
  return std::max(*a, *b);
}

class Evaluator {
 public:
  Evaluator(const SampledSignal& s, const MonitorOptions& opts) : s_(s), opts_(opts), n_(s.length()) {
    end_ = opts.end_time.value_or(n_ > 0 ? static_cast<double>(n_ - 1) * s.h : 0.0);
  }

  // `negated` tracks an odd number of enclosing negations. A predicate is strict in the
  // negation normal form when its relation is strict XOR it sits under a negation.
  Value eval(const Formula& f, std::size_t t, bool negated = false) {
    switch (f.op) {
      case Op::Predicate: {
        if (t >= n_) {
          missing_.insert(t);
          return std::nullopt;
        }
        double m = f.pred.margin([&](const std::string& ch) {
          const auto it = s_.channels.find(ch);
          if (it == s_.channels.end()) throw StlError("unknown channel '" + ch + "'");
          return it->second[t];
        });
        if (is_strict(f.pred.rel) && !negated) m -= opts_.strict_margin;
        if (!is_strict(f.pred.rel) && negated) m += opts_.strict_margin;
        return m;
      }
      case Op::Not: {
        const Value v = eval(*f.children[0], t, !negated);
        return v ? Value(-*v) : v;
      }
      case Op::And:
        return combine_min(eval(*f.children[0], t, negated), eval(*f.children[1], t, negated));
      case Op::Or:
        return combine_max(eval(*f.children[0], t, negated), eval(*f.children[1], t, negated));
      case Op::Always:
      case Op::Eventually: {
        const IndexWindow w = window_offsets(f.interval, s_.h, end_);
        const bool always = f.op == Op::Always;
        if (w.empty()) return always ? kInfinity : -kInfinity;
        Value acc;
        for (std::size_t i = w.first; i <= w.last; ++i) {
          const Value v = eval(*f.children[0], t + i, negated);
          acc = always ? combine_min(acc, v) : combine_max(acc, v);
        }
        return acc;
      }
      case Op::Until: {
        const IndexWindow w = window_offsets(f.interval, s_.h, end_);
        if (w.empty()) return -kInfinity;
        Value best;
        Value prefix = kInfinity;  // min of phi1 over [t, t')
        for (std::size_t tp = t; tp <= t + w.last; ++tp) {
          if (tp >= t + w.first) best = combine_max(best, combine_min(eval(*f.children[1], tp, negated), prefix));
          prefix = combine_min(prefix, eval(*f.children[0], tp, negated));
        }
        return best;
      }
    }
    return std::nullopt;
  }

  const std::set<std::size_t>& missing() const { return missing_; }

 private:
  const SampledSignal& s_;
  const MonitorOptions& opts_;
  std::size_t n_;
  double end_;
  std::set<std::size_t> missing_;
};

}  // namespace

double robustness(const Formula& f, const SampledSignal& s, std::size_t t, const MonitorOptions& opts) {
  if (!(s.h > 0.0)) throw StlError("sampling period must be positive");
  Evaluator ev(s, opts);
  const Value v = ev.eval(f, t);
  if (!opts.skip_missing && !ev.missing().empty()) {
    std::string list;
    for (std::size_t i : ev.missing()) list += (list.empty() ? "" : ", ") + std::to_string(i);
    throw StlError("signal too short: missing sample indices " + list + " (length " + std::to_string(s.length()) + ")");
  }
  return v.value_or(kInfinity);
}

bool satisfies(const Formula& f, const SampledSignal& s, std::size_t t, const MonitorOptions& opts) {
  return robustness(f, s, t, opts) >= 0.0;
}

}  // namespace wws::stl
