#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "levybench/rng.hpp"

namespace levybench {

struct Deconvolution {
  Vector psf;  // unit-sum taps, length odd
  double psf_variance;
};

struct FourierSampling {
  // Selected DFT frequency indices, DC (0) first, then ascending.
  std::vector<std::size_t> frequencies;
};

// Any other explicit matrix (identity denoising, empty prior-only operator, tests).
struct CustomOperator {
  std::string label;
};

using OperatorKind = std::variant<Deconvolution, FourierSampling, CustomOperator>;

struct ProblemInstance {
  Matrix H;
  OperatorKind kind;
  double noise_var = 1.0;

  Eigen::Index measurements() const { return H.rows(); }
  Eigen::Index signal_length() const { return H.cols(); }
};

std::string operator_name(const OperatorKind& kind);

ProblemInstance build_deconvolution(std::size_t signal_length, std::size_t psf_length, double psf_variance);
ProblemInstance build_fourier_sampling(std::size_t signal_length, std::size_t dft_rows, RngStream& rng);
ProblemInstance build_custom(Matrix H, std::string label, double noise_var = 1.0);

// sigma_n^2 = mean(||H s||^2 / M) / 10^(snr/10).
double calibrate_noise(const Matrix& H, const std::vector<Vector>& signals, double target_snr_db);

// y = H s + n with n ~ N(0, noise_var I). noise_var = 0 gives y = H s.
Vector simulate_measurements(RngStream& rng, const ProblemInstance& inst, const Vector& signal);

// 10 log10(sum ||H s||^2 / sum ||y - H s||^2) over paired signals and measurements.
double realized_snr_db(const Matrix& H, const std::vector<Vector>& signals, const std::vector<Vector>& measurements);

}  // namespace levybench
