#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wws/stl/formula.hpp"

namespace wws::stl {

/// Uniformly sampled multi-channel signal. Sample i is taken at start + i * h.
struct SampledSignal {
  double h = 60.0;
  double start = 0.0;
  std::map<std::string, std::vector<double>> channels;

  /// Common channel length; throws StlError when lengths differ.
  std::size_t length() const;
};

struct MonitorOptions {
  /// Value substituted for `end`; defaults to (length - 1) * h.
  std::optional<double> end_time;
  /// Subtracted from the margin of predicates that are strict in negation normal form,
  /// matching the encoder's eps: `not (y >= c)` is tightened like `y < c`.
  double strict_margin = 0.0;
  /// Ignore samples past the signal end instead of failing. A formula whose every
  /// sample is missing evaluates to +infinity (nothing observed can violate it).
  bool skip_missing = false;
};

/// Quantitative robustness of f at sample index t (min/max semantics).
/// Throws StlError naming the missing sample indices when the signal is too short.
double robustness(const Formula& f, const SampledSignal& s, std::size_t t = 0, const MonitorOptions& opts = {});

/// Boolean satisfaction: robustness >= 0.
bool satisfies(const Formula& f, const SampledSignal& s, std::size_t t = 0, const MonitorOptions& opts = {});

}  // namespace wws::stl
