#include "wws/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "wws/error.hpp"

namespace wws::csv {

std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("csv: not a number: '" + text + "'");
  }
  return v;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
  out << '\n';
}

std::vector<std::string> plant_cells(double t, const State& x, double u, double w) {
  std::vector<std::string> c{format(t)};
  for (int i = 0; i < kStateDim; ++i) c.push_back(format(x(i)));
  c.push_back(format(u));
  c.push_back(format(w));
  c.push_back(format(output(x)));
  return c;
}

const std::vector<std::string> kPlantHeader{"t", "x1", "x2", "x3", "x4", "x5", "x6", "u", "w", "y"};

opt::Status parse_status(const std::string& s) {
  if (s == "optimal") return opt::Status::Optimal;
  if (s == "infeasible") return opt::Status::Infeasible;
  if (s == "iteration-limit") return opt::Status::IterationLimit;
  throw ConfigError("csv: unknown solver status '" + s + "'");
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("csv: missing column '" + name + "'");
}

double Table::number(std::size_t row, const std::string& name) const { return parse_number(rows.at(row).at(column(name))); }

Table read(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ConfigError("csv: row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read(in);
}

void write_plant_trace(std::ostream& out, const std::vector<State>& xs, const std::vector<double>& u,
                       const std::vector<double>& w, double h) {
  write_row(out, kPlantHeader);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    write_row(out, plant_cells(static_cast<double>(k) * h, xs[k], k < u.size() ? u[k] : nan, k < w.size() ? w[k] : nan));
  }
}

PlantTrace read_plant_trace(std::istream& in) {
  const Table t = read(in);
  PlantTrace p;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    p.t.push_back(t.number(r, "t"));
    State x;
    for (int i = 0; i < kStateDim; ++i) x(i) = t.number(r, "x" + std::to_string(i + 1));
    p.x.push_back(x);
    p.u.push_back(t.number(r, "u"));
    p.w.push_back(t.number(r, "w"));
    p.y.push_back(t.number(r, "y"));
  }
  return p;
}

void write_trace(std::ostream& out, const ClosedLoopTrace& trace) {
  std::vector<std::string> header = kPlantHeader;
  for (const char* c : {"status", "objective", "binaries", "bb_nodes"}) header.emplace_back(c);
  for (std::size_t f = 0; f < trace.formulas.size(); ++f) header.push_back("rho_" + std::to_string(f));
  write_row(out, header);
  for (const auto& r : trace.rows) {
    auto cells = plant_cells(r.t, r.x, r.u, r.w);
    cells.emplace_back(opt::to_string(r.status));
    cells.push_back(format(r.objective));
    cells.push_back(std::to_string(r.binaries));
    cells.push_back(std::to_string(r.nodes));
    for (std::size_t f = 0; f < trace.formulas.size(); ++f) {
      cells.push_back(format(f < r.robustness.size() ? r.robustness[f] : std::numeric_limits<double>::quiet_NaN()));
    }
    write_row(out, cells);
  }
}

ClosedLoopTrace read_trace(std::istream& in) {
  const Table t = read(in);
  ClosedLoopTrace tr;
  std::size_t n_rho = 0;
  while (true) {
    const std::string name = "rho_" + std::to_string(n_rho);
    if (std::find(t.header.begin(), t.header.end(), name) == t.header.end()) break;
    ++n_rho;
  }
  tr.formulas.resize(n_rho);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TraceRow row;
    row.t = t.number(r, "t");
    for (int i = 0; i < kStateDim; ++i) row.x(i) = t.number(r, "x" + std::to_string(i + 1));
    row.u = t.number(r, "u");
    row.w = t.number(r, "w");
    row.y = t.number(r, "y");
    row.status = parse_status(t.rows[r][t.column("status")]);
    row.objective = t.number(r, "objective");
    row.binaries = static_cast<std::size_t>(t.number(r, "binaries"));
    row.nodes = static_cast<std::size_t>(t.number(r, "bb_nodes"));
    for (std::size_t f = 0; f < n_rho; ++f) row.robustness.push_back(t.number(r, "rho_" + std::to_string(f)));
    if (row.status != opt::Status::Optimal && !tr.first_infeasible) tr.first_infeasible = r;
    tr.rows.push_back(std::move(row));
  }
  if (tr.rows.size() >= 2) tr.h = tr.rows[1].t - tr.rows[0].t;
  if (!tr.rows.empty()) tr.end_time = tr.rows.back().t;
  return tr;
}

void write_sweep(std::ostream& out, const SweepResult& sweep) {
  std::vector<std::string> header{"initial"};
  for (double s : sweep.start_times) header.push_back(format(s));
  write_row(out, header);
  for (std::size_t i = 0; i < sweep.initial_temps.size(); ++i) {
    std::vector<std::string> cells{format(sweep.initial_temps[i])};
    for (int c : sweep.cells[i]) cells.push_back(std::to_string(c));
    write_row(out, cells);
  }
}

SweepResult read_sweep(std::istream& in) {
  const Table t = read(in);
  if (t.header.empty() || t.header[0] != "initial") throw ConfigError("csv: sweep table must start with 'initial'");
  SweepResult s;
  for (std::size_t j = 1; j < t.header.size(); ++j) s.start_times.push_back(parse_number(t.header[j]));
  for (const auto& row : t.rows) {
    s.initial_temps.push_back(parse_number(row[0]));
    std::vector<int> cells;
    for (std::size_t j = 1; j < row.size(); ++j) {
      const double v = parse_number(row[j]);
      if (v != 0.0 && v != 1.0) throw ConfigError("csv: sweep cells must be 0 or 1");
      cells.push_back(static_cast<int>(v));
    }
    s.cells.push_back(std::move(cells));
  }
  s.notes.assign(s.initial_temps.size(), std::vector<std::string>(s.start_times.size()));
  return s;
}

}  // namespace wws::csv
