#include "wws/stl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wws/error.hpp"

namespace wws::stl {

void SymbolicSignal::set(const std::string& channel, std::size_t index, opt::AffineExpr value) {
  auto& v = samples_[channel];
  if (v.size() <= index) v.resize(index + 1);
  v[index] = std::move(value);
}

const opt::AffineExpr* SymbolicSignal::at(const std::string& channel, std::size_t index) const {
  const auto it = samples_.find(channel);
  if (it == samples_.end()) throw StlError("unknown channel '" + channel + "'");
  if (index >= it->second.size() || !it->second[index]) return nullptr;
  return &*it->second[index];
}

namespace {

enum class Truth { True, False, Unknown };

struct Item {
  const Formula* f;
  std::size_t t;
};
using Conjunction = std::vector<Item>;

class Encoder {
 public:
  Encoder(const SymbolicSignal& s, opt::ProblemBuilder& b, const EncodingConfig& cfg, std::string tag)
      : s_(s), b_(b), cfg_(cfg), tag_(std::move(tag)) {}

  void number_nodes(const Formula& f) {
    ids_.emplace(&f, ids_.size());
    for (const auto& c : f.children) number_nodes(*c);
  }

  void imply(const Formula& f, std::size_t t, const opt::AffineExpr& lit) {
    switch (f.op) {
      case Op::Predicate:
        imply_predicate(f, t, lit);
        return;
      case Op::Not:
        throw StlError("encoder requires negation normal form");
      case Op::And:
      case Op::Always:
        for (const Item& it : conjuncts(f, t)) imply(*it.f, it.t, lit);
        return;
      case Op::Or:
      case Op::Eventually:
      case Op::Until:
        imply_disjunction(alternatives(f, t), lit);
        return;
    }
  }

  EncodingStats stats() const {
    EncodingStats st = stats_;
    st.deferred_samples = missing_.size();
    return st;
  }
  const std::set<std::pair<std::string, std::size_t>>& missing() const { return missing_; }

 private:
  double strict_eps(const Formula& f) const { return is_strict(f.pred.rel) ? cfg_.eps : 0.0; }

  // Margin as an affine expression, or nullopt when a sample is unavailable.
  std::optional<opt::AffineExpr> margin(const Formula& f, std::size_t t) {
    opt::AffineExpr lhs;
    bool complete = true;
    for (const auto& term : f.pred.terms) {
      const opt::AffineExpr* e = s_.at(term.channel, t);
      if (!e) {
        missing_.emplace(term.channel, t);
        complete = false;
        continue;
      }
      lhs += term.coef * *e;
    }
    if (!complete) return std::nullopt;
    const bool ge = f.pred.rel == Relation::Ge || f.pred.rel == Relation::Gt;
    opt::AffineExpr m = ge ? lhs - opt::AffineExpr(f.pred.rhs) : opt::AffineExpr(f.pred.rhs) - lhs;
    return m;
  }

  std::vector<Item> conjuncts(const Formula& f, std::size_t t) const {
    if (f.op == Op::And) return {{f.children[0].get(), t}, {f.children[1].get(), t}};
    std::vector<Item> out;
    const IndexWindow w = window_offsets(f.interval, s_.h(), cfg_.end_time);
    if (w.empty()) return out;
    for (std::size_t i = w.first; i <= w.last; ++i) out.push_back({f.children[0].get(), t + i});
    return out;
  }

  std::vector<Conjunction> alternatives(const Formula& f, std::size_t t) const {
    std::vector<Conjunction> out;
    if (f.op == Op::Or) {
      out.push_back({{f.children[0].get(), t}});
      out.push_back({{f.children[1].get(), t}});
      return out;
    }
    const IndexWindow w = window_offsets(f.interval, s_.h(), cfg_.end_time);
    if (w.empty()) return out;
    for (std::size_t i = w.first; i <= w.last; ++i) {
      if (f.op == Op::Eventually) {
        out.push_back({{f.children[0].get(), t + i}});
        continue;
      }
      // Until: phi2 at t + i, phi1 on [t, t + i).
      Conjunction c{{f.children[1].get(), t + i}};
      for (std::size_t j = t; j < t + i; ++j) c.push_back({f.children[0].get(), j});
      out.push_back(std::move(c));
    }
    return out;
  }

  Truth truth(const Formula& f, std::size_t t) {
    const auto key = std::make_pair(ids_.at(&f), t);
    if (const auto it = truth_cache_.find(key); it != truth_cache_.end()) return it->second;
    Truth r = Truth::Unknown;
    switch (f.op) {
      case Op::Predicate: {
        const auto m = margin(f, t);
        if (!m) {
          r = Truth::True;  // deferred
        } else if (m->is_constant()) {
          r = m->constant >= strict_eps(f) - cfg_.history_tol ? Truth::True : Truth::False;
        }
        break;
      }
      case Op::Not:
        throw StlError("encoder requires negation normal form");
      case Op::And:
      case Op::Always:
        r = conjunction_truth(conjuncts(f, t));
        break;
      case Op::Or:
      case Op::Eventually:
      case Op::Until: {
        bool all_false = true;
        for (const auto& alt : alternatives(f, t)) {
          const Truth a = conjunction_truth(alt);
          if (a == Truth::True) {
            all_false = false;
            r = Truth::True;
            break;
          }
          if (a == Truth::Unknown) all_false = false;
        }
        if (r != Truth::True) r = all_false ? Truth::False : Truth::Unknown;
        break;
      }
    }
    truth_cache_.emplace(key, r);
    return r;
  }

  Truth conjunction_truth(const Conjunction& c) {
    bool all_true = true;
    for (const Item& it : c) {
      const Truth v = truth(*it.f, it.t);
      if (v == Truth::False) return Truth::False;
      if (v == Truth::Unknown) all_true = false;
    }
    return all_true ? Truth::True : Truth::Unknown;
  }

  void imply_predicate(const Formula& f, std::size_t t, const opt::AffineExpr& lit) {
    const auto m = margin(f, t);
    if (!m) return;
    const double eps = strict_eps(f);
    if (m->is_constant()) {
      if (m->constant < eps - cfg_.history_tol) add_le(lit, 0.0);
      return;
    }
    if (lit.is_constant()) {
      // lit is 1 here: a hard row.
      add_ge(*m, eps);
      return;
    }
    const int p = predicate_binary(f, t, *m, eps);
    add_ge(opt::AffineExpr::variable(p) - lit, 0.0);
  }

  int predicate_binary(const Formula& f, std::size_t t, const opt::AffineExpr& m, double eps) {
    const auto key = std::make_pair(ids_.at(&f), t);
    if (const auto it = binaries_.find(key); it != binaries_.end()) return it->second;
    const auto [lo, hi] = b_.range(m);
    const double pad = 1.0 + cfg_.m_padding;
    const double m1 = std::isfinite(lo) ? pad * std::max(eps - lo, 0.0) : cfg_.big_m;
    const double m2 = std::isfinite(hi) ? pad * std::max(hi - eps, 0.0) : cfg_.big_m;
    const int p = b_.add_variable(0.0, 1.0, opt::VarType::Binary,
                                  tag_ + "_p" + std::to_string(key.first) + "_" + std::to_string(t));
    ++stats_.binaries;
    // p = 1  =>  m >= eps
    add_ge(m - m1 * opt::AffineExpr::variable(p), eps - m1);
    // p = 0  =>  m <= eps
    add_le(m - m2 * opt::AffineExpr::variable(p), eps);
    binaries_.emplace(key, p);
    return p;
  }

  void imply_disjunction(std::vector<Conjunction> alts, const opt::AffineExpr& lit) {
    std::vector<Conjunction> open;
    for (auto& alt : alts) {
      const Truth v = conjunction_truth(alt);
      if (v == Truth::True) return;
      if (v == Truth::Unknown) open.push_back(std::move(alt));
    }
    if (open.empty()) {
      add_le(lit, 0.0);
      return;
    }
    if (open.size() == 1) {
      for (const Item& it : open[0]) imply(*it.f, it.t, lit);
      return;
    }
    opt::AffineExpr rest = lit;
    opt::AffineExpr sum;
    for (std::size_t i = 0; i + 1 < open.size(); ++i) {
      const int s = b_.add_variable(0.0, 1.0, opt::VarType::Continuous, tag_ + "_s" + std::to_string(b_.num_vars()));
      ++stats_.selectors;
      const auto sel = opt::AffineExpr::variable(s);
      sum += sel;
      rest -= sel;
      for (const Item& it : open[i]) imply(*it.f, it.t, sel);
    }
    add_le(sum - lit, 0.0);
    for (const Item& it : open.back()) imply(*it.f, it.t, rest);
  }

  void add_ge(opt::AffineExpr e, double lo) {
    b_.add_ge(std::move(e), lo);
    ++stats_.constraints;
  }
  void add_le(opt::AffineExpr e, double hi) {
    b_.add_le(std::move(e), hi);
    ++stats_.constraints;
  }

  const SymbolicSignal& s_;
  opt::ProblemBuilder& b_;
  const EncodingConfig& cfg_;
  std::string tag_;
  std::map<const Formula*, std::size_t> ids_;
  std::map<std::pair<std::size_t, std::size_t>, int> binaries_;
  std::map<std::pair<std::size_t, std::size_t>, Truth> truth_cache_;
  std::set<std::pair<std::string, std::size_t>> missing_;
  EncodingStats stats_;
};

}  // namespace

EncodingStats encode(const FormulaPtr& f, const SymbolicSignal& signal, std::size_t t, opt::ProblemBuilder& builder,
                     const EncodingConfig& cfg, const std::string& tag) {
  if (!(cfg.eps > 0.0)) throw StlError("encoding eps must be positive");
  if (!(cfg.history_tol >= 0.0)) throw StlError("history tolerance must be non-negative");
  if (!(cfg.big_m > 0.0)) throw StlError("encoding big-M must be positive");
  const FormulaPtr nnf = to_nnf(f);
  Encoder enc(signal, builder, cfg, tag);
  enc.number_nodes(*nnf);
  enc.imply(*nnf, t, opt::AffineExpr(1.0));
  if (cfg.availability == Availability::Require && !enc.missing().empty()) {
    std::string list;
    for (const auto& [ch, i] : enc.missing()) list += (list.empty() ? "" : ", ") + ch + "[" + std::to_string(i) + "]";
    throw StlError("formula needs samples beyond the available horizon: " + list);
  }
  return enc.stats();
}

}  // namespace wws::stl
