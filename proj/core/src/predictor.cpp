#include "wws/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "wws/linalg.hpp"

namespace wws {
namespace {

struct Interval {
  double lo;
  double hi;
};

Interval interval_pow(Interval x, int e) {
  if (e == 0) return {1.0, 1.0};
  const double a = std::pow(x.lo, e);
  const double b = std::pow(x.hi, e);
  if (e % 2 == 0 && x.lo < 0.0 && x.hi > 0.0) return {0.0, std::max(a, b)};
  return {std::min(a, b), std::max(a, b)};
}

Interval interval_mul(Interval x, Interval y) {
  const double p[] = {x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi};
  return {*std::min_element(std::begin(p), std::end(p)), *std::max_element(std::begin(p), std::end(p))};
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, const char* name) {
  if (!rows.is_array()) throw PredictorError(std::string("predictor file: ") + name + " must be an array of rows");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
      throw PredictorError(std::string("predictor file: ragged matrix ") + name);
    }
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr, const char* name) {
  if (!arr.is_array()) throw PredictorError(std::string("predictor file: ") + name + " must be an array");
  const auto v = arr.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// splitmix64 finaliser; decorrelates per-column seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t column) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (column + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}  // namespace

// ---------------------------------------------------------------- observables

ObservableSet::ObservableSet(std::vector<Exponents> terms) : terms_(std::move(terms)) {
  for (const auto& e : terms_) {
    for (int p : e) {
      if (p < 0) throw PredictorError("observable exponents must be non-negative");
    }
  }
}

ObservableSet ObservableSet::default_set() {
  return ObservableSet({
      {1, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0}, {0, 0, 1, 0, 0, 0}, {0, 0, 0, 1, 0, 0},
      {0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, 0, 1}, {0, 0, 2, 0, 0, 0}, {0, 0, 0, 2, 0, 0},
      {0, 0, 0, 0, 2, 0}, {0, 0, 2, 1, 0, 0}, {0, 0, 1, 2, 0, 0}, {0, 0, 0, 2, 1, 0},
      {0, 0, 0, 1, 2, 0}, {0, 0, 3, 0, 0, 0}, {0, 0, 0, 3, 0, 0}, {0, 0, 0, 0, 3, 0},
  });
}

ObservableSet ObservableSet::identity() {
  std::vector<Exponents> t;
  for (int i = 0; i < kStateDim; ++i) {
    Exponents e{};
    e[static_cast<std::size_t>(i)] = 1;
    t.push_back(e);
  }
  return ObservableSet(std::move(t));
}

bool ObservableSet::has_identity_prefix() const {
  if (terms_.size() < static_cast<std::size_t>(kStateDim)) return false;
  const auto id = identity();
  return std::equal(id.terms_.begin(), id.terms_.end(), terms_.begin());
}

Eigen::VectorXd ObservableSet::lift(const State& x) const {
  Eigen::VectorXd z(static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    double v = 1.0;
    for (int j = 0; j < kStateDim; ++j) {
      for (int p = 0; p < terms_[i][static_cast<std::size_t>(j)]; ++p) v *= x(j);
    }
    z(static_cast<Eigen::Index>(i)) = v;
  }
  return z;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ObservableSet::lift_box(double lo, double hi) const {
  const auto n = static_cast<Eigen::Index>(terms_.size());
  Eigen::VectorXd zl(n), zh(n);
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    Interval acc{1.0, 1.0};
    for (int j = 0; j < kStateDim; ++j) {
      acc = interval_mul(acc, interval_pow({lo, hi}, terms_[i][static_cast<std::size_t>(j)]));
    }
    zl(static_cast<Eigen::Index>(i)) = acc.lo;
    zh(static_cast<Eigen::Index>(i)) = acc.hi;
  }
  return {zl, zh};
}

nlohmann::json ObservableSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : terms_) arr.push_back(std::vector<int>(e.begin(), e.end()));
  return arr;
}

ObservableSet ObservableSet::from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw PredictorError("observables must be an array of exponent vectors");
  std::vector<Exponents> t;
  for (const auto& row : doc) {
    const auto v = row.get<std::vector<int>>();
    if (v.size() != static_cast<std::size_t>(kStateDim)) throw PredictorError("observable exponent vector must have 6 entries");
    Exponents e{};
    std::copy(v.begin(), v.end(), e.begin());
    t.push_back(e);
  }
  return ObservableSet(std::move(t));
}

// ---------------------------------------------------------------- predictor

Eigen::VectorXd LinearPredictor::lift(const State& x) const {
  if (operating_point) return observables.lift(x - operating_point->x);
  return observables.lift(x);
}

Eigen::VectorXd LinearPredictor::drift() const {
  if (!operating_point) return Eigen::VectorXd::Zero(dim());
  return -(bu * operating_point->u + bd * operating_point->w);
}

State LinearPredictor::output_offset() const { return operating_point ? operating_point->x : State::Zero(); }

Eigen::VectorXd LinearPredictor::next(const Eigen::VectorXd& z, double u, double w) const {
  Eigen::VectorXd zn = A * z + bu * u + bd * w;
  if (operating_point) zn += drift();
  return zn;
}

State LinearPredictor::reconstruct(const Eigen::VectorXd& z) const {
  State x = C * z;
  if (operating_point) x += operating_point->x;
  return x;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> LinearPredictor::lifted_bounds(double lo, double hi) const {
  if (!operating_point) return observables.lift_box(lo, hi);
  // Identity observables on deviations: shift the box per coordinate.
  Eigen::VectorXd zl(dim()), zh(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    zl(i) = lo - operating_point->x(i);
    zh(i) = hi - operating_point->x(i);
  }
  return {zl, zh};
}

void LinearPredictor::validate() const {
  const Eigen::Index n = A.rows();
  if (n == 0 || A.cols() != n) throw PredictorError("predictor: A must be square and non-empty");
  if (bu.size() != n || bd.size() != n) throw PredictorError("predictor: bu/bd length must equal N");
  if (C.rows() != kStateDim || C.cols() != n) throw PredictorError("predictor: C must be 6 x N");
  if (static_cast<Eigen::Index>(observables.size()) != n) throw PredictorError("predictor: observable count must equal N");
  if (!(h > 0.0) || !std::isfinite(h)) throw PredictorError("predictor: h must be positive");
  if (!A.allFinite() || !bu.allFinite() || !bd.allFinite() || !C.allFinite()) {
    throw PredictorError("predictor: non-finite matrix entry");
  }
  if (operating_point && !operating_point->x.allFinite()) throw PredictorError("predictor: non-finite operating point");
}

nlohmann::json LinearPredictor::to_json() const {
  nlohmann::json doc;
  doc["kind"] = operating_point ? "local" : "edmd";
  doc["N"] = dim();
  doc["h"] = h;
  doc["A"] = matrix_to_json(A);
  doc["bu"] = to_std(bu);
  doc["bd"] = to_std(bd);
  doc["C"] = matrix_to_json(C);
  doc["observables"] = observables.to_json();
  if (operating_point) {
    doc["operating_point"] = {{"x", to_std(operating_point->x)}, {"u", operating_point->u}, {"w", operating_point->w}};
  }
  doc["meta"] = meta;
  return doc;
}

LinearPredictor LinearPredictor::from_json(const nlohmann::json& doc) {
  LinearPredictor p;
  try {
    p.h = doc.at("h").get<double>();
    p.A = matrix_from_json(doc.at("A"), "A");
    p.bu = vector_from_json(doc.at("bu"), "bu");
    p.bd = vector_from_json(doc.at("bd"), "bd");
    p.C = matrix_from_json(doc.at("C"), "C");
    p.observables = ObservableSet::from_json(doc.at("observables"));
    if (doc.contains("operating_point")) {
      const auto& op = doc["operating_point"];
      OperatingPoint o;
      o.x = vector_from_json(op.at("x"), "operating_point.x");
      o.u = op.at("u").get<double>();
      o.w = op.at("w").get<double>();
      p.operating_point = o;
    }
    if (doc.contains("meta")) p.meta = doc["meta"];
    if (doc.contains("N") && doc["N"].get<Eigen::Index>() != p.A.rows()) {
      throw PredictorError("predictor file: N does not match A");
    }
  } catch (const nlohmann::json::exception& e) {
    throw PredictorError(std::string("predictor file: ") + e.what());
  }
  p.validate();
  return p;
}

void LinearPredictor::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw PredictorError("cannot write predictor file " + path.string());
  out << to_json().dump(1) << '\n';
}

LinearPredictor LinearPredictor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PredictorError("cannot open predictor file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw PredictorError("predictor file " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

std::vector<State> predict(const LinearPredictor& p, const State& x0, std::span<const double> u_seq,
                           std::span<const double> w_seq) {
  if (u_seq.size() != w_seq.size()) throw PredictorError("predict: u and w sequences differ in length");
  std::vector<State> out;
  out.reserve(u_seq.size() + 1);
  Eigen::VectorXd z = p.lift(x0);
  out.push_back(p.reconstruct(z));
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    z = p.next(z, u_seq[k], w_seq[k]);
    out.push_back(p.reconstruct(z));
  }
  return out;
}

// ---------------------------------------------------------------- dataset

void DatasetConfig::validate(std::size_t lifted_dim) const {
  if (K < lifted_dim + 2) throw ConfigError("dataset: K must be at least N + 2");
  if (!(p_off >= 0.0 && p_off <= 1.0)) throw ConfigError("dataset: p_off must lie in [0, 1]");
  if (!(state_lo <= state_hi)) throw ConfigError("dataset: state range is empty");
  if (!(u_lo <= u_hi)) throw ConfigError("dataset: input band is empty");
  if (!(h > 0.0)) throw ConfigError("dataset: h must be positive");
}

Dataset generate_dataset(const PlantModel& model, const DatasetConfig& cfg, const IntegratorOptions& integrator) {
  cfg.validate(0);
  const auto K = static_cast<Eigen::Index>(cfg.K);
  Dataset d;
  d.h = cfg.h;
  d.X.resize(kStateDim, K);
  d.U.resize(K);
  d.W = Eigen::RowVectorXd::Constant(K, cfg.w0);
  d.Xnext.resize(kStateDim, K);

  // Draws first, serially per column; integration is the parallel part.
  for (Eigen::Index i = 0; i < K; ++i) {
    std::mt19937_64 g(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    const double shared = cfg.state_lo + (cfg.state_hi - cfg.state_lo) * uniform01(g);
    for (int j = 0; j < kStateDim; ++j) {
      d.X(j, i) = cfg.shared_state_draw ? shared : cfg.state_lo + (cfg.state_hi - cfg.state_lo) * uniform01(g);
    }
    const bool off = uniform01(g) < cfg.p_off;
    const double on_value = cfg.u_lo + (cfg.u_hi - cfg.u_lo) * uniform01(g);
    d.U(i) = off ? 0.0 : on_value;
  }

  unsigned threads = cfg.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : cfg.threads;
  threads = static_cast<unsigned>(std::min<Eigen::Index>(threads, std::max<Eigen::Index>(K, 1)));

  std::mutex err_mutex;
  Eigen::Index first_bad = K;
  std::string first_msg;
  auto worker = [&](unsigned tid) {
    for (Eigen::Index i = tid; i < K; i += threads) {
      try {
        d.Xnext.col(i) = step(model, d.X.col(i), d.U(i), d.W(i), cfg.h, integrator);
      } catch (const PlantError& e) {
        std::lock_guard lock(err_mutex);
        if (i < first_bad) {
          first_bad = i;
          first_msg = e.what();
        }
        return;
      }
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
  }
  if (first_bad < K) {
    throw PlantError(PlantError::Kind::Divergence, "dataset column " + std::to_string(first_bad) + ": " + first_msg,
                     static_cast<std::size_t>(first_bad));
  }
  return d;
}

// ---------------------------------------------------------------- regression

nlohmann::json FitDiagnostics::to_json() const {
  return {{"regressor_rank", regressor_rank},
          {"lift_rank", lift_rank},
          {"regressor_condition", regressor_condition},
          {"lift_condition", lift_condition},
          {"rank_deficient", rank_deficient},
          {"dynamics_residual_max", dynamics_residual_max},
          {"dynamics_residual_rms", dynamics_residual_rms},
          {"output_residual_max", output_residual_max}};
}

FitResult fit_lifted(const ObservableSet& obs, const Eigen::MatrixXd& Z, const Eigen::RowVectorXd& U,
                     const Eigen::RowVectorXd& W, const Eigen::MatrixXd& Znext, const Eigen::MatrixXd& X, double h) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index k = Z.cols();
  if (Znext.rows() != n || Znext.cols() != k || U.size() != k || W.size() != k || X.cols() != k ||
      X.rows() != kStateDim) {
    throw PredictorError("fit: snapshot matrix dimensions disagree");
  }
  if (static_cast<Eigen::Index>(obs.size()) != n) throw PredictorError("fit: observable count does not match lifted rows");
  if (k < n + 2) throw PredictorError("fit: need at least N + 2 snapshots");

  Eigen::MatrixXd regressor(n + 2, k);
  regressor.topRows(n) = Z;
  regressor.row(n) = U;
  regressor.row(n + 1) = W;

  PinvInfo reg_info, lift_info;
  const Eigen::MatrixXd abd = times_pinv(Znext, regressor, kPinvRelativeCutoff, &reg_info);
  const Eigen::MatrixXd c = times_pinv(X, Z, kPinvRelativeCutoff, &lift_info);

  FitResult r;
  auto& p = r.predictor;
  p.A = abd.leftCols(n);
  p.bu = abd.col(n);
  p.bd = abd.col(n + 1);
  p.C = c;
  p.h = h;
  p.observables = obs;

  auto& dg = r.diagnostics;
  dg.regressor_rank = reg_info.rank;
  dg.lift_rank = lift_info.rank;
  dg.regressor_condition = reg_info.condition;
  dg.lift_condition = lift_info.condition;
  dg.rank_deficient = reg_info.rank_deficient || lift_info.rank_deficient;
  const Eigen::MatrixXd dyn_res = Znext - abd * regressor;
  dg.dynamics_residual_max = dyn_res.cwiseAbs().maxCoeff();
  dg.dynamics_residual_rms = std::sqrt(dyn_res.squaredNorm() / static_cast<double>(dyn_res.size()));
  dg.output_residual_max = (X - c * Z).cwiseAbs().maxCoeff();

  p.meta["K"] = k;
  p.meta["residuals"] = dg.to_json();
  return r;
}

FitResult fit_edmd(const ObservableSet& obs, const Eigen::MatrixXd& X, const Eigen::RowVectorXd& U,
                   const Eigen::RowVectorXd& W, const Eigen::MatrixXd& Xnext, double h) {
  if (X.rows() != kStateDim || Xnext.rows() != kStateDim || Xnext.cols() != X.cols()) {
    throw PredictorError("fit_edmd: X and X' must be 6 x K");
  }
  const auto n = static_cast<Eigen::Index>(obs.size());
  Eigen::MatrixXd Z(n, X.cols()), Zn(n, X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    Z.col(i) = obs.lift(X.col(i));
    Zn.col(i) = obs.lift(Xnext.col(i));
  }
  return fit_lifted(obs, Z, U, W, Zn, X, h);
}

FitResult fit_edmd(const ObservableSet& obs, const Dataset& data) {
  return fit_edmd(obs, data.X, data.U, data.W, data.Xnext, data.h);
}

}  // namespace wws
