#include "levybench/variational.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>

#include "levybench/errors.hpp"
#include "levybench/parallel.hpp"
#include "levybench/processes.hpp"

namespace levybench {

namespace {

std::mutex g_factor_mutex;

Matrix difference_gram(Eigen::Index k) {
  Matrix g = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    g(i, i) = i + 1 < k ? 2.0 : 1.0;
    if (i + 1 < k) {
      g(i, i + 1) = -1.0;
      g(i + 1, i) = -1.0;
    }
  }
  return g;
}

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("tau must be positive and finite");
}

double log_penalty_scalar(double c, double x, double t) { return c * std::log1p(t * t) + 0.5 * (t - x) * (t - x); }

}  // namespace

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::L2:
      return "l2";
    case Estimator::L1:
      return "l1";
    case Estimator::Log:
      return "log";
  }
  return "?";
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "l2") return Estimator::L2;
  if (name == "l1") return Estimator::L1;
  if (name == "log") return Estimator::Log;
  throw ParameterError("unknown estimator '" + name + "'");
}

void validate(const AdmmConfig& cfg) {
  if (cfg.rho && !(*cfg.rho > 0.0)) throw ParameterError("ADMM penalty must be positive");
  if (cfg.max_iters < 1) throw ParameterError("ADMM needs at least one iteration");
  if (!(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0)) throw ParameterError("ADMM tolerances must be positive");
  if (!(cfg.relaxation > 0.0 && cfg.relaxation < 2.0)) throw ParameterError("ADMM relaxation must lie in (0, 2)");
}

TauGrid::TauGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ParameterError("tau grid is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    require_tau(values_[i]);
    if (i > 0 && !(values_[i] > values_[i - 1])) throw ParameterError("tau grid must be strictly increasing");
  }
}

TauGrid TauGrid::log_spaced(double lo, double hi, std::size_t points) {
  require_tau(lo);
  require_tau(hi);
  if (points == 0) throw ParameterError("tau grid needs at least one point");
  if (points == 1) return TauGrid({lo});
  if (!(hi > lo)) throw ParameterError("tau grid upper bound must exceed lower bound");
  std::vector<double> values(points);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < points; ++i) {
    values[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return TauGrid(std::move(values));
}

Vector apply_difference_transpose(const Vector& v) {
  Vector out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) out(k) = v(k) - (k + 1 < v.size() ? v(k + 1) : 0.0);
  return out;
}

double objective(Estimator e, const Vector& y, const Matrix& H, double tau, const Vector& s) {
  const Vector u = finite_difference(s);
  double penalty = 0.0;
  switch (e) {
    case Estimator::L2:
      penalty = u.squaredNorm();
      break;
    case Estimator::L1:
      penalty = u.lpNorm<1>();
      break;
    case Estimator::Log:
      for (Eigen::Index k = 0; k < u.size(); ++k) penalty += std::log1p(u(k) * u(k));
      break;
  }
  return (y - H * s).squaredNorm() + tau * penalty;
}

double soft_threshold(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

double log_prox(double x, double c) {
  if (!(c >= 0.0)) throw ParameterError("log prox weight must be nonnegative");
  if (x == 0.0 || c == 0.0) return x;
  // Real roots of t^3 + a t^2 + b t + d with a = -x, b = 1 + 2c, d = -x.
  const double a = -x;
  const double b = 1.0 + 2.0 * c;
  const double d = -x;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
  const double shift = -a / 3.0;
  std::array<double, 3> roots{};
  int count = 0;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    roots[count++] = std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) + shift;
  } else if (p == 0.0) {
    roots[count++] = shift;
  } else {
    const double r = std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (2.0 * p * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j) roots[count++] = 2.0 * r * std::cos(phi - 2.0 * M_PI * j / 3.0) + shift;
  }
  double best = x;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    double t = roots[static_cast<std::size_t>(i)];
    // Newton polish on the stationarity polynomial.
    for (int it = 0; it < 3; ++it) {
      const double f = ((t + a) * t + b) * t + d;
      const double df = (3.0 * t + 2.0 * a) * t + b;
      if (df == 0.0) break;
      t -= f / df;
    }
    const double value = log_penalty_scalar(c, x, t);
    if (value < best_value) {
      best_value = value;
      best = t;
    }
  }
  return best;
}

double l1_optimality_residual(const Vector& y, const Matrix& H, double tau, const Vector& s, double zero_tol) {
  const Vector grad = 2.0 * H.transpose() * (H * s - y);
  // g = -D^{-T} grad; D^{-T} is the reverse cumulative sum.
  Vector g(grad.size());
  double acc = 0.0;
  for (Eigen::Index k = grad.size() - 1; k >= 0; --k) {
    acc += grad(k);
    g(k) = -acc;
  }
  const Vector u = finite_difference(s);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double violation =
        std::abs(u(k)) > zero_tol ? std::abs(g(k) - tau * (u(k) > 0.0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(g(k)) - tau);
    worst = std::max(worst, violation);
  }
  return worst;
}

VariationalSolver::VariationalSolver(const Matrix& H)
    : H_(H), HtH_(H.transpose() * H), DtD_(difference_gram(H.cols())) {}

const Eigen::LLT<Matrix>& VariationalSolver::factor(double data_weight, double reg_weight) {
  std::lock_guard lock(g_factor_mutex);
  auto& slot = factors_[{data_weight, reg_weight}];
  if (!slot) {
    slot = std::make_unique<Eigen::LLT<Matrix>>(data_weight * HtH_ + reg_weight * DtD_);
    if (slot->info() != Eigen::Success) throw NumericalError("normal equations are not positive definite");
  }
  return *slot;
}

Vector VariationalSolver::estimate_l2(const Vector& y, double tau) {
  require_tau(tau);
  if (y.size() != H_.rows()) throw ParameterError("measurement length does not match operator");
  return factor(1.0, tau).solve(H_.transpose() * y);
}

EstimateResult VariationalSolver::admm(Penalty penalty, const Vector& y, double tau, const AdmmConfig& cfg) {
  require_tau(tau);
  validate(cfg);
  if (y.size() != H_.rows()) throw ParameterError("measurement length does not match operator");
  const Eigen::Index k = H_.cols();
  double rho = cfg.rho.value_or(tau);
  const Eigen::LLT<Matrix>* llt = &factor(2.0, rho);
  const Vector hty2 = 2.0 * H_.transpose() * y;
  const double sqrt_k = std::sqrt(static_cast<double>(k));
  double weight = tau / rho;
  const Estimator as_estimator =
      penalty == Penalty::Quadratic ? Estimator::L2 : (penalty == Penalty::L1 ? Estimator::L1 : Estimator::Log);

  Vector s = cfg.warm_start ? *cfg.warm_start : Vector::Zero(k);
  if (s.size() != k) throw ParameterError("warm start length does not match operator");
  Vector z = finite_difference(s);
  Vector w = Vector::Zero(k);

  EstimateResult best;
  best.estimate = s;
  best.objective = objective(as_estimator, y, H_, tau, s);
  const bool track_best = penalty == Penalty::Log;

  EstimateResult out;
  out.converged = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    s = llt->solve(hty2 + rho * apply_difference_transpose(z - w));
    const Vector ds = finite_difference(s);
    const Vector z_old = z;
    const Vector ds_hat = cfg.relaxation * ds + (1.0 - cfg.relaxation) * z_old;
    const Vector v = ds_hat + w;
    switch (penalty) {
      case Penalty::Quadratic:
        z = v / (1.0 + 2.0 * weight);
        break;
      case Penalty::L1:
        for (Eigen::Index i = 0; i < k; ++i) z(i) = soft_threshold(v(i), weight);
        break;
      case Penalty::Log:
        for (Eigen::Index i = 0; i < k; ++i) z(i) = log_prox(v(i), weight);
        break;
    }
    w += ds_hat - z;

    out.iterations = it;
    out.primal_residual = (ds - z).norm();
    out.dual_residual = rho * apply_difference_transpose(z - z_old).norm();
    if (track_best) {
      const double value = objective(as_estimator, y, H_, tau, s);
      if (value < best.objective) {
        best.objective = value;
        best.estimate = s;
      }
    }
    const double eps_primal = sqrt_k * cfg.abs_tol + cfg.rel_tol * std::max(ds.norm(), z.norm());
    const double eps_dual = sqrt_k * cfg.abs_tol + cfg.rel_tol * rho * apply_difference_transpose(w).norm();
    if (out.primal_residual <= eps_primal && out.dual_residual <= eps_dual) {
      out.converged = true;
      break;
    }
    if (cfg.adaptive_rho && it % 10 == 0) {
      double scale = 1.0;
      if (out.primal_residual > 10.0 * out.dual_residual) scale = 2.0;
      else if (out.dual_residual > 10.0 * out.primal_residual) scale = 0.5;
      if (scale != 1.0 && rho * scale > 1e-10 * tau && rho * scale < 1e10 * tau) {
        rho *= scale;
        w /= scale;
        weight = tau / rho;
        llt = &factor(2.0, rho);
      }
    }
  }
  if (track_best) {
    out.estimate = best.estimate;
    out.objective = best.objective;
  } else {
    // cumsum(z) has exactly sparse increments; keep it when it is no worse.
    out.estimate = s;
    out.objective = objective(as_estimator, y, H_, tau, s);
    Vector sparse = cumulative_sum(z);
    const double sparse_objective = objective(as_estimator, y, H_, tau, sparse);
    if (sparse_objective <= out.objective) {
      out.estimate = std::move(sparse);
      out.objective = sparse_objective;
    }
  }
  return out;
}

EstimateResult VariationalSolver::estimate_l1(const Vector& y, double tau, const AdmmConfig& cfg) {
  EstimateResult r = admm(Penalty::L1, y, tau, cfg);
  r.kkt_residual = l1_optimality_residual(y, H_, tau, r.estimate) / (1.0 + (H_.transpose() * y).cwiseAbs().maxCoeff());
  return r;
}

EstimateResult VariationalSolver::estimate_l2_admm(const Vector& y, double tau, const AdmmConfig& cfg) {
  return admm(Penalty::Quadratic, y, tau, cfg);
}

EstimateResult VariationalSolver::estimate_log(const Vector& y, double tau, const AdmmConfig& cfg) {
  if (cfg.warm_start) return admm(Penalty::Log, y, tau, cfg);
  AdmmConfig warm = cfg;
  warm.warm_start = estimate_l1(y, tau, cfg).estimate;
  return admm(Penalty::Log, y, tau, warm);
}

EstimateResult VariationalSolver::estimate(Estimator e, const Vector& y, double tau, const AdmmConfig& cfg) {
  switch (e) {
    case Estimator::L2: {
      EstimateResult r;
      r.estimate = estimate_l2(y, tau);
      r.objective = objective(Estimator::L2, y, H_, tau, r.estimate);
      return r;
    }
    case Estimator::L1:
      return estimate_l1(y, tau, cfg);
    case Estimator::Log:
      return estimate_log(y, tau, cfg);
  }
  throw ParameterError("unknown estimator");
}

Vector estimate_l2(const Vector& y, const ProblemInstance& inst, double tau) {
  return VariationalSolver(inst.H).estimate_l2(y, tau);
}

EstimateResult estimate_l1(const Vector& y, const ProblemInstance& inst, double tau, const AdmmConfig& cfg) {
  return VariationalSolver(inst.H).estimate_l1(y, tau, cfg);
}

EstimateResult estimate_log(const Vector& y, const ProblemInstance& inst, double tau, const AdmmConfig& cfg) {
  return VariationalSolver(inst.H).estimate_log(y, tau, cfg);
}

double squared_error(const Vector& truth, const Vector& estimate) {
  return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
}

namespace {

TuningResult tune(Estimator e, const ProblemInstance& inst, const std::vector<Example>& split, const TauGrid& grid,
                  const AdmmConfig& cfg, bool oracle) {
  if (split.empty()) throw ParameterError("tuning split is empty");
  VariationalSolver solver(inst.H);
  TuningResult result;
  result.oracle = oracle;
  result.mse.reserve(grid.size());
  std::vector<double> errors(split.size());
  for (double tau : grid.values()) {
    parallel_for(split.size(), [&](std::size_t i) {
      errors[i] = squared_error(split[i].signal, solver.estimate(e, split[i].measurements, tau, cfg).estimate);
    });
    double sum = 0.0;
    for (double err : errors) sum += err;
    result.mse.push_back(sum / static_cast<double>(split.size()));
  }
  const auto best = std::min_element(result.mse.begin(), result.mse.end());
  result.index = static_cast<std::size_t>(best - result.mse.begin());
  result.tau = grid.values()[result.index];
  return result;
}

}  // namespace

TuningResult tune_tau(Estimator e, const ProblemInstance& inst, const std::vector<Example>& split, const TauGrid& grid,
                      const AdmmConfig& cfg) {
  return tune(e, inst, split, grid, cfg, false);
}

TuningResult tune_tau_oracle(Estimator e, const ProblemInstance& inst, const std::vector<Example>& test_split,
                             const TauGrid& grid, const AdmmConfig& cfg) {
  return tune(e, inst, test_split, grid, cfg, true);
}

std::vector<Vector> reconstruct_split(Estimator e, const ProblemInstance& inst, const std::vector<Example>& split,
                                      double tau, const AdmmConfig& cfg) {
  VariationalSolver solver(inst.H);
  std::vector<Vector> out(split.size());
  parallel_for(split.size(), [&](std::size_t i) { out[i] = solver.estimate(e, split[i].measurements, tau, cfg).estimate; });
  return out;
}

bool is_unimodal(const std::vector<double>& curve) {
  std::size_t i = 1;
  while (i < curve.size() && curve[i] <= curve[i - 1]) ++i;
  while (i < curve.size() && curve[i] >= curve[i - 1]) ++i;
  return i >= curve.size();
}

}  // namespace levybench
