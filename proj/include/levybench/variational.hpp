#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "levybench/dataset.hpp"
#include "levybench/forward.hpp"

namespace levybench {

// Variational estimators minimize ||y - H s||^2 + tau * sum_k phi([D s]_k) with
//   l2:  phi(x) = x^2
//   l1:  phi(x) = |x|
//   log: phi(x) = log(1 + x^2)
enum class Estimator { L2, L1, Log };

std::string estimator_name(Estimator e);
Estimator estimator_from_name(const std::string& name);

struct AdmmConfig {
  std::optional<double> rho;  // initial penalty, defaults to tau
  // Residual balancing: rho is doubled or halved every 10 iterations when the
  // primal and dual residuals differ by more than a factor of 10.
  bool adaptive_rho = false;
  int max_iters = 2000;
  double abs_tol = 1e-6;
  double rel_tol = 1e-4;
  double relaxation = 1.0;  // over-relaxation factor in (0, 2)
  std::optional<Vector> warm_start;
};

void validate(const AdmmConfig& cfg);

struct EstimateResult {
  Vector estimate;
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  // l1 only: optimality residual scaled by 1 + ||H^T y||_inf.
  double kkt_residual = 0.0;
};

class TauGrid {
 public:
  explicit TauGrid(std::vector<double> values);
  static TauGrid log_spaced(double lo, double hi, std::size_t points);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<double> values_;
};

double objective(Estimator e, const Vector& y, const Matrix& H, double tau, const Vector& s);

// Componentwise D^T v, i.e. (D^T v)_k = v_k - v_{k+1}.
Vector apply_difference_transpose(const Vector& v);

double soft_threshold(double x, double threshold);
// argmin_t  c log(1 + t^2) + (t - x)^2 / 2, from the real roots of
// t^3 - x t^2 + (2c + 1) t - x = 0.
double log_prox(double x, double c);

// Largest violation of the l1 optimality conditions: with
// g = -D^{-T} 2 H^T (H s - y), g_k must equal tau sign([Ds]_k) on the support
// and lie in [-tau, tau] elsewhere. Increments with |[Ds]_k| <= zero_tol count as zero.
double l1_optimality_residual(const Vector& y, const Matrix& H, double tau, const Vector& s, double zero_tol = 1e-7);

// Caches the normal-equation factorizations for one operator so that
// repeated solves at the same tau (or rho) reuse them.
class VariationalSolver {
 public:
  explicit VariationalSolver(const Matrix& H);

  Vector estimate_l2(const Vector& y, double tau);
  EstimateResult estimate_l1(const Vector& y, double tau, const AdmmConfig& cfg);
  // Warm start defaults to the l1 estimate at the same tau.
  EstimateResult estimate_log(const Vector& y, double tau, const AdmmConfig& cfg);
  EstimateResult estimate(Estimator e, const Vector& y, double tau, const AdmmConfig& cfg);
  // The l2 objective through the same ADMM splitting; a check on the iteration.
  EstimateResult estimate_l2_admm(const Vector& y, double tau, const AdmmConfig& cfg);

  const Matrix& H() const { return H_; }

 private:
  enum class Penalty { Quadratic, L1, Log };
  EstimateResult admm(Penalty penalty, const Vector& y, double tau, const AdmmConfig& cfg);
  const Eigen::LLT<Matrix>& factor(double data_weight, double reg_weight);

  Matrix H_;
  Matrix HtH_;
  Matrix DtD_;
  std::map<std::pair<double, double>, std::unique_ptr<Eigen::LLT<Matrix>>> factors_;
};

Vector estimate_l2(const Vector& y, const ProblemInstance& inst, double tau);
EstimateResult estimate_l1(const Vector& y, const ProblemInstance& inst, double tau, const AdmmConfig& cfg);
EstimateResult estimate_log(const Vector& y, const ProblemInstance& inst, double tau, const AdmmConfig& cfg);

// Per-signal squared error ||s - s_hat||^2 / K.
double squared_error(const Vector& truth, const Vector& estimate);

struct TuningResult {
  double tau = 0.0;
  std::size_t index = 0;
  std::vector<double> mse;  // mean per-signal squared error for each grid value
  bool oracle = false;      // selected on the evaluation split itself
};

// Selects the tau with the lowest mean squared error over the examples; ties
// go to the smaller tau.
TuningResult tune_tau(Estimator e, const ProblemInstance& inst, const std::vector<Example>& split, const TauGrid& grid,
                      const AdmmConfig& cfg);
TuningResult tune_tau_oracle(Estimator e, const ProblemInstance& inst, const std::vector<Example>& test_split,
                             const TauGrid& grid, const AdmmConfig& cfg);

// Reconstructs every example of a split at a fixed tau.
std::vector<Vector> reconstruct_split(Estimator e, const ProblemInstance& inst, const std::vector<Example>& split,
                                      double tau, const AdmmConfig& cfg);

// True when the curve is non-increasing then non-decreasing.
bool is_unimodal(const std::vector<double>& curve);

}  // namespace levybench
