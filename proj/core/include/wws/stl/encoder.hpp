#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wws/optimizer/problem.hpp"
#include "wws/stl/formula.hpp"

namespace wws::stl {

/// Channel samples bound to affine expressions over problem variables.
/// Constant expressions stand for recorded history; absent samples are unavailable.
class SymbolicSignal {
 public:
  explicit SymbolicSignal(double h = 60.0) : h_(h) {}

  double h() const { return h_; }
  void set(const std::string& channel, std::size_t index, opt::AffineExpr value);
  void set_constant(const std::string& channel, std::size_t index, double value) {
    set(channel, index, opt::AffineExpr(value));
  }
  /// Declares a channel with no samples yet, so lookups report missing samples instead of an unknown name.
  void declare(const std::string& channel) { samples_[channel]; }
  bool has_channel(const std::string& channel) const { return samples_.count(channel) > 0; }
  const opt::AffineExpr* at(const std::string& channel, std::size_t index) const;

 private:
  double h_;
  std::map<std::string, std::vector<std::optional<opt::AffineExpr>>> samples_;
};

/// What to do with samples the signal does not cover.
enum class Availability {
  /// Treat them as satisfied; they are constrained again once they enter the horizon.
  Defer,
  /// Fail with StlError listing the uncovered sample indices.
  Require,
};

struct EncodingConfig {
  /// Fallback big-M when a predicate involves an unbounded variable.
  double big_m = 1e4;
  /// Margin enforced on strict predicates.
  double eps = 1e-6;
  /// Relative padding applied to the per-predicate big-M derived from variable bounds.
  double m_padding = 0.1;
  /// Constant samples (recorded history) within this distance below a threshold still satisfy
  /// the predicate. A plan that meets y >= 40 with equality is realised a rounding error below it.
  double history_tol = 1e-6;
  /// Value substituted for `end`.
  std::optional<double> end_time;
  Availability availability = Availability::Require;
};

struct EncodingStats {
  std::size_t binaries = 0;
  /// Continuous disjunction selectors.
  std::size_t selectors = 0;
  std::size_t constraints = 0;
  std::size_t deferred_samples = 0;
};

/// Adds constraints to `builder` that hold iff f is satisfied at sample t, with strict
/// predicates tightened by eps. Formulas are normalised to NNF first.
///
/// Each needed (predicate, time) pair gets one binary that equals its truth value:
///   p = 1  =>  margin >= eps_s,   p = 0  =>  margin <= eps_s,
/// and every literal that depends on it adds p >= literal. Disjunctions distribute
/// their literal over continuous selectors summing to it. Conjunctions at top level
/// produce plain linear rows with no binaries. Binary names are `<tag>_p<node>_<t>`.
EncodingStats encode(const FormulaPtr& f, const SymbolicSignal& signal, std::size_t t, opt::ProblemBuilder& builder,
                     const EncodingConfig& cfg, const std::string& tag = "phi");

}  // namespace wws::stl
