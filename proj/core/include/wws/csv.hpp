#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wws/mpc.hpp"
#include "wws/plant.hpp"

namespace wws::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double v);
double parse_number(const std::string& text);

/// Header plus rows of raw cells; quoting is not supported (no field contains commas).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

Table read(std::istream& in);
Table read(const std::filesystem::path& path);

/// Open-loop plant trace: t,x1..x6,u,w,y. Row k holds x_k and the input applied on [t_k, t_k + h);
/// the final state has no input and its u,w cells are `nan`.
void write_plant_trace(std::ostream& out, const std::vector<State>& xs, const std::vector<double>& u,
                       const std::vector<double>& w, double h);

struct PlantTrace {
  std::vector<double> t;
  std::vector<State> x;
  std::vector<double> u;
  std::vector<double> w;
  std::vector<double> y;
};
PlantTrace read_plant_trace(std::istream& in);

/// Closed-loop trace: the plant columns, then status,objective,binaries,bb_nodes and one rho_<i> per formula.
void write_trace(std::ostream& out, const ClosedLoopTrace& trace);
ClosedLoopTrace read_trace(std::istream& in);

/// Feasibility table: header `initial,<start times...>`, one row per initial temperature.
void write_sweep(std::ostream& out, const SweepResult& sweep);
SweepResult read_sweep(std::istream& in);

}  // namespace wws::csv
