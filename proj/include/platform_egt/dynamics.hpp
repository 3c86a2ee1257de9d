#ifndef PLATFORM_EGT_DYNAMICS_HPP
#define PLATFORM_EGT_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "platform_egt/combinatorics.hpp"
#include "platform_egt/domain.hpp"
#include "platform_egt/payoff.hpp"

namespace platform_egt::dynamics {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FermiProbabilities {
  double increase = 0.5;  // f+: the count of H-players goes up
  double decrease = 0.5;  // f-
};

// `advantage` is u_H - u_L. Evaluated in the overflow-free logistic form, with
// the larger probability taken as the complement so the pair sums to one.
inline FermiProbabilities fermi(double advantage, double beta, FermiSign sign = FermiSign::Standard) {
  if (!(beta >= 0.0)) throw DomainError("selection strength must be nonnegative");
  // Literal reads f+ = 1 / (1 + exp(-beta * (u_L - u_H))).
  const double x = beta * (sign == FermiSign::Standard ? advantage : -advantage);
  if (x == 0.0 || std::isnan(x)) return {};
  const double small = std::exp(-std::abs(x)) / (1.0 + std::exp(-std::abs(x)));
  return x > 0.0 ? FermiProbabilities{1.0 - small, small} : FermiProbabilities{small, 1.0 - small};
}

struct StateMoves {
  double up_m = 0.0;
  double down_m = 0.0;
  double up_d = 0.0;
  double down_d = 0.0;
  double stay = 1.0;

  double drift_m() const { return up_m - down_m; }
  double drift_d() const { return up_d - down_d; }
};

// Row-stochastic nearest-neighbour chain over the (h_M, h_D) lattice.
class TransitionMatrix {
 public:
  TransitionMatrix(ProviderPopulation pop, double mu, std::vector<StateMoves> rows)
      : pop_(pop), mu_(mu), rows_(std::move(rows)) {}

  std::size_t size() const { return rows_.size(); }
  const ProviderPopulation& population() const { return pop_; }
  double mutation() const { return mu_; }
  const StateMoves& moves(std::size_t i) const { return rows_[i]; }
  std::span<const StateMoves> rows() const { return rows_; }

  Eigen::SparseMatrix<double, Eigen::RowMajor> sparse() const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(rows_.size() * 5);
    const auto stride = static_cast<std::ptrdiff_t>(pop_.z_d + 1);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& r = rows_[i];
      const auto row = static_cast<std::ptrdiff_t>(i);
      trip.emplace_back(row, row, r.stay);
      if (r.up_d > 0.0) trip.emplace_back(row, row + 1, r.up_d);
      if (r.down_d > 0.0) trip.emplace_back(row, row - 1, r.down_d);
      if (r.up_m > 0.0) trip.emplace_back(row, row + stride, r.up_m);
      if (r.down_m > 0.0) trip.emplace_back(row, row - stride, r.down_m);
    }
    const auto n = static_cast<Eigen::Index>(rows_.size());
    Eigen::SparseMatrix<double, Eigen::RowMajor> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  }

  // Dense lookup; zero for non-neighbours.
  double at(std::size_t from, std::size_t to) const {
    const auto& r = rows_.at(from);
    const auto stride = static_cast<std::size_t>(pop_.z_d + 1);
    if (to == from) return r.stay;
    if (to == from + 1 && state_at(from, pop_).h_d < pop_.z_d) return r.up_d;
    if (to + 1 == from && state_at(from, pop_).h_d > 0) return r.down_d;
    if (to == from + stride) return r.up_m;
    if (to + stride == from) return r.down_m;
    return 0.0;
  }

  // max_i |sum_j P_ij - 1|
  double row_sum_error() const {
    double worst = 0.0;
    for (const auto& r : rows_) {
      CompensatedSum s;
      for (double v : {r.up_m, r.down_m, r.up_d, r.down_d, r.stay}) s += v;
      worst = std::max(worst, std::abs(s.value() - 1.0));
    }
    return worst;
  }

  // x P for a row vector x.
  std::vector<double> left_multiply(std::span<const double> x) const {
    std::vector<double> y(x.size(), 0.0);
    const auto stride = static_cast<std::size_t>(pop_.z_d + 1);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto& r = rows_[i];
      y[i] += x[i] * r.stay;
      if (r.up_d > 0.0) y[i + 1] += x[i] * r.up_d;
      if (r.down_d > 0.0) y[i - 1] += x[i] * r.down_d;
      if (r.up_m > 0.0) y[i + stride] += x[i] * r.up_m;
      if (r.down_m > 0.0) y[i - stride] += x[i] * r.down_m;
    }
    return y;
  }

 private:
  ProviderPopulation pop_;
  double mu_;
  std::vector<StateMoves> rows_;
};

// Moves out of `state` given its utility table.
inline StateMoves state_moves(const State& state, const payoff::UtilityTable& u, const ModelConfig& cfg) {
  const auto& pop = cfg.population;
  const double mu = cfg.evolution.mu;
  const double z = static_cast<double>(pop.total());
  StateMoves mv;
  auto group_moves = [&](Group g, double& up, double& down) {
    const double zg = static_cast<double>(pop.size(g));
    const double h = static_cast<double>(state.high(g));
    const auto f = fermi(u.at(g, Strategy::High) - u.at(g, Strategy::Low), cfg.evolution.beta, cfg.fermi_sign);
    // An L-player meets an H-player of its group, or vice versa.
    const double meet = (zg - h) / zg * h / (zg - 1.0);
    up = mu * (zg - h) / z + (1.0 - mu) * meet * f.increase;
    down = mu * h / z + (1.0 - mu) * meet * f.decrease;
  };
  group_moves(Group::Marginalised, mv.up_m, mv.down_m);
  group_moves(Group::Dominant, mv.up_d, mv.down_d);
  CompensatedSum out;
  for (double v : {mv.up_m, mv.down_m, mv.up_d, mv.down_d}) out += v;
  mv.stay = 1.0 - out.value();
  return mv;
}

inline TransitionMatrix transition_matrix(const ModelConfig& cfg, std::span<const payoff::UtilityTable> utilities) {
  const auto n = lattice_size(cfg.population);
  if (utilities.size() != n) throw DomainError("utility field does not cover the lattice");
  std::vector<StateMoves> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = state_moves(state_at(i, cfg.population), utilities[i], cfg);
  return TransitionMatrix(cfg.population, cfg.evolution.mu, std::move(rows));
}

inline TransitionMatrix transition_matrix(const ModelConfig& cfg) {
  validate(cfg);
  const auto u = payoff::utility_field(cfg);
  return transition_matrix(cfg, u);
}

struct Drift {
  double d_m = 0.0;
  double d_d = 0.0;
};

struct StationaryResult {
  std::vector<double> distribution;  // lattice order
  double residual = 0.0;             // ||h P - h||_1
  std::vector<Drift> drift;
  std::string method;
  std::size_t iterations = 0;
};

inline double stationary_residual(const TransitionMatrix& p, std::span<const double> h) {
  const auto hp = p.left_multiply(h);
  CompensatedSum r;
  for (std::size_t i = 0; i < h.size(); ++i) r += std::abs(hp[i] - h[i]);
  return r.value();
}

inline std::vector<Drift> drift_field(const TransitionMatrix& p) {
  std::vector<Drift> out;
  out.reserve(p.size());
  for (const auto& r : p.rows()) out.push_back(Drift{r.drift_m(), r.drift_d()});
  return out;
}

inline std::vector<Drift> drift_field(const ModelConfig& cfg) { return drift_field(transition_matrix(cfg)); }

namespace detail {

inline bool normalize_nonnegative(std::vector<double>& h) {
  CompensatedSum s;
  for (double& v : h) {
    if (!std::isfinite(v)) return false;
    // Roundoff below zero.
    if (v < 0.0) {
      if (v < -1e-12) return false;
      v = 0.0;
    }
    s += v;
  }
  const double total = s.value();
  if (!(total > 0.0)) return false;
  for (double& v : h) v /= total;
  return true;
}

// Columns of (I - P)^T are rows of I - P; each entry is visited as
// (row of A, value). The normalization row is handled by the caller.
template <typename Fn>
void for_each_in_column(const TransitionMatrix& p, std::size_t col, Fn&& fn) {
  const auto& r = p.moves(col);
  const auto stride = static_cast<std::size_t>(p.population().z_d + 1);
  fn(col, 1.0 - r.stay);
  if (r.up_d > 0.0) fn(col + 1, -r.up_d);
  if (r.down_d > 0.0) fn(col - 1, -r.down_d);
  if (r.up_m > 0.0) fn(col + stride, -r.up_m);
  if (r.down_m > 0.0) fn(col - stride, -r.down_m);
}

// Gaussian elimination on the banded (I - P)^T bordered by a dense row of
// ones. No pivoting: the leading block is diagonally dominant by columns.
// Returns false on a nonpositive or non-finite pivot.
inline bool solve_bordered_band(const TransitionMatrix& p, std::vector<double>& x) {
  const std::size_t n = p.size();
  const std::size_t w = static_cast<std::size_t>(p.population().z_d + 1);
  const std::size_t width = 2 * w + 1;
  // band[i * width + (j - i + w)] = A(i, j) for rows i < n - 1.
  std::vector<double> band((n - 1) * width, 0.0);
  std::vector<double> last(n, 1.0);
  for (std::size_t col = 0; col < n; ++col) {
    for_each_in_column(p, col, [&](std::size_t row, double v) {
      if (row != n - 1) band[row * width + (col + w - row)] = v;
    });
  }
  auto at = [&](std::size_t i, std::size_t j) -> double& { return band[i * width + (j + w - i)]; };

  double rhs_last = 1.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double pivot = at(k, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) return false;
    const std::size_t jmax = std::min(k + w, n - 1);
    const std::size_t imax = std::min(k + w, n - 2);
    for (std::size_t i = k + 1; i <= imax; ++i) {
      const double f = at(i, k) / pivot;
      if (f == 0.0) continue;
      for (std::size_t j = k; j <= jmax; ++j) at(i, j) -= f * at(k, j);
    }
    const double f = last[k] / pivot;
    for (std::size_t j = k; j <= jmax; ++j) last[j] -= f * at(k, j);
  }
  if (!(last[n - 1] != 0.0) || !std::isfinite(last[n - 1])) return false;
  x.assign(n, 0.0);
  x[n - 1] = rhs_last / last[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    const std::size_t jmax = std::min(k + w, n - 1);
    double s = 0.0;
    for (std::size_t j = k + 1; j <= jmax; ++j) s += at(k, j) * x[j];
    x[k] = -s / at(k, k);
  }
  return true;
}

inline bool solve_sparse_lu(const TransitionMatrix& p, std::vector<double>& x) {
  const auto n = static_cast<Eigen::Index>(p.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(p.size() * 6);
  for (std::size_t col = 0; col < p.size(); ++col) {
    for_each_in_column(p, col, [&](std::size_t row, double v) {
      if (static_cast<Eigen::Index>(row) != n - 1 && v != 0.0) {
        trip.emplace_back(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col), v);
      }
    });
    trip.emplace_back(n - 1, static_cast<Eigen::Index>(col), 1.0);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd sol = lu.solve(rhs);
  // One refinement step.
  const Eigen::VectorXd r = rhs - a * sol;
  sol += lu.solve(r);
  if (lu.info() != Eigen::Success) return false;
  x.assign(sol.data(), sol.data() + n);
  return true;
}

inline std::vector<double> power_iteration(const TransitionMatrix& p, std::size_t max_iter, double tol,
                                           std::size_t& iterations) {
  const std::size_t n = p.size();
  std::vector<double> x(n, 1.0 / static_cast<double>(n));
  std::vector<double> mean(n, 0.0);
  for (iterations = 1; iterations <= max_iter; ++iterations) {
    x = p.left_multiply(x);
    // Cesaro average of the iterates.
    const double w = 1.0 / static_cast<double>(iterations);
    for (std::size_t i = 0; i < n; ++i) mean[i] += w * (x[i] - mean[i]);
    if (iterations % 1000 == 0 && stationary_residual(p, x) < tol) return x;
  }
  return mean;
}

}  // namespace detail

inline constexpr double kStationaryTolerance = 1e-10;

enum class SolveMethod { Auto, BandedLu, SparseLu, PowerIteration };

// Solves h (I - P) = 0 with sum(h) = 1 by replacing the last balance equation
// with the normalization row. Auto tries the banded elimination, then Eigen's
// pivoting SparseLU, then Cesaro-averaged power iteration.
inline StationaryResult stationary(const TransitionMatrix& p, SolveMethod method = SolveMethod::Auto) {
  if (!(p.mutation() > 0.0)) {
    throw SolverError("stationary distribution requires mu > 0 (chain is reducible otherwise)");
  }
  StationaryResult out;
  auto accept = [&](const char* name, std::size_t iterations) {
    if (!detail::normalize_nonnegative(out.distribution)) return false;
    out.residual = stationary_residual(p, out.distribution);
    out.method = name;
    out.iterations = iterations;
    return out.residual < kStationaryTolerance;
  };

  bool ok = false;
  if (method == SolveMethod::Auto || method == SolveMethod::BandedLu) {
    ok = detail::solve_bordered_band(p, out.distribution) && accept("banded_lu", 1);
  }
  if (!ok && (method == SolveMethod::Auto || method == SolveMethod::SparseLu)) {
    ok = detail::solve_sparse_lu(p, out.distribution) && accept("sparse_lu", 2);
  }
  if (!ok && (method == SolveMethod::Auto || method == SolveMethod::PowerIteration)) {
    std::size_t iters = 0;
    out.distribution = detail::power_iteration(p, 1'000'000, kStationaryTolerance, iters);
    ok = accept("power_iteration", iters);
  }
  if (!ok) {
    throw SolverError("stationary solve failed (method " + out.method + ", residual " +
                      std::to_string(out.residual) + ")");
  }
  out.drift = drift_field(p);
  return out;
}

}  // namespace platform_egt::dynamics

#endif  // PLATFORM_EGT_DYNAMICS_HPP
