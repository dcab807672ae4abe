#include "levybench/forward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "levybench/errors.hpp"

namespace levybench {

std::string operator_name(const OperatorKind& kind) {
  if (std::holds_alternative<Deconvolution>(kind)) return "deconvolution";
  if (std::holds_alternative<FourierSampling>(kind)) return "fourier";
  return std::get<CustomOperator>(kind).label;
}

ProblemInstance build_deconvolution(std::size_t signal_length, std::size_t psf_length, double psf_variance) {
  if (psf_length == 0 || psf_length % 2 == 0) throw ParameterError("psf length must be odd");
  if (psf_length > signal_length) throw ParameterError("psf length exceeds signal length");
  if (!(psf_variance > 0.0) || !std::isfinite(psf_variance)) throw ParameterError("psf variance must be positive");

  const auto taps = static_cast<Eigen::Index>(psf_length);
  const Eigen::Index center = taps / 2;
  Vector psf(taps);
  for (Eigen::Index j = 0; j < taps; ++j) {
    const double offset = static_cast<double>(j - center);
    psf(j) = std::exp(-offset * offset / (2.0 * psf_variance));
  }
  psf /= psf.sum();

  const auto k = static_cast<Eigen::Index>(signal_length);
  const Eigen::Index m = k - taps + 1;
  Matrix H = Matrix::Zero(m, k);
  // Row i holds the reversed taps over columns i .. i + taps - 1.
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < taps; ++j) H(i, i + j) = psf(taps - 1 - j);
  }
  return ProblemInstance{std::move(H), Deconvolution{std::move(psf), psf_variance}, 1.0};
}

ProblemInstance build_fourier_sampling(std::size_t signal_length, std::size_t dft_rows, RngStream& rng) {
  const std::size_t max_index = signal_length / 2;
  if (signal_length == 0 || dft_rows < 1 || dft_rows > max_index + 1) {
    throw ParameterError("number of DFT rows must lie in [1, floor(K/2) + 1]");
  }

  // Weighted sampling without replacement (Efraimidis-Spirakis keys u^(1/w)),
  // weight 1/(1 + f), which favours low frequencies.
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(max_index);
  for (std::size_t f = 1; f <= max_index; ++f) {
    const double weight = 1.0 / (1.0 + static_cast<double>(f));
    keys.emplace_back(std::log(rng.uniform()) / weight, f);
  }
  std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i + 1 < dft_rows; ++i) chosen.push_back(keys[i].second);
  std::sort(chosen.begin(), chosen.end());

  std::vector<std::size_t> frequencies{0};
  frequencies.insert(frequencies.end(), chosen.begin(), chosen.end());

  const auto k = static_cast<Eigen::Index>(signal_length);
  const auto pairs = static_cast<Eigen::Index>(chosen.size());
  Matrix H(1 + 2 * pairs, k);
  H.row(0).setOnes();
  for (Eigen::Index r = 0; r < pairs; ++r) {
    const double omega = 2.0 * M_PI * static_cast<double>(chosen[static_cast<std::size_t>(r)]) / static_cast<double>(k);
    for (Eigen::Index col = 0; col < k; ++col) {
      // Sample positions are 1..K; e^{-j omega k} split into real and imaginary rows.
      const double phase = omega * static_cast<double>(col + 1);
      H(1 + r, col) = std::cos(phase);
      H(1 + pairs + r, col) = -std::sin(phase);
    }
  }
  return ProblemInstance{std::move(H), FourierSampling{std::move(frequencies)}, 1.0};
}

ProblemInstance build_custom(Matrix H, std::string label, double noise_var) {
  if (!H.allFinite()) throw ParameterError("operator entries must be finite");
  return ProblemInstance{std::move(H), CustomOperator{std::move(label)}, noise_var};
}

double calibrate_noise(const Matrix& H, const std::vector<Vector>& signals, double target_snr_db) {
  if (signals.empty()) throw ParameterError("calibration needs at least one signal");
  if (!std::isfinite(target_snr_db)) throw ParameterError("target SNR must be finite");
  if (H.rows() == 0) throw DegenerateCalibrationError("operator has no measurements");
  double power = 0.0;
  for (const auto& s : signals) {
    if (s.size() != H.cols()) throw ParameterError("signal length does not match operator");
    power += (H * s).squaredNorm() / static_cast<double>(H.rows());
  }
  power /= static_cast<double>(signals.size());
  if (!(power > 0.0)) throw DegenerateCalibrationError("calibration signals have zero measurement power");
  return power / std::pow(10.0, target_snr_db / 10.0);
}

Vector simulate_measurements(RngStream& rng, const ProblemInstance& inst, const Vector& signal) {
  if (signal.size() != inst.H.cols()) throw ParameterError("signal length does not match operator");
  if (!(inst.noise_var >= 0.0)) throw ParameterError("noise variance must be nonnegative");
  Vector y = inst.H * signal;
  if (inst.noise_var > 0.0) {
    const double sd = std::sqrt(inst.noise_var);
    for (Eigen::Index m = 0; m < y.size(); ++m) y(m) += sd * rng.standard_normal();
  }
  return y;
}

double realized_snr_db(const Matrix& H, const std::vector<Vector>& signals, const std::vector<Vector>& measurements) {
  if (signals.size() != measurements.size() || signals.empty()) throw ParameterError("signal/measurement count mismatch");
  double clean = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const Vector hs = H * signals[i];
    clean += hs.squaredNorm();
    noise += (measurements[i] - hs).squaredNorm();
  }
  return 10.0 * std::log10(clean / noise);
}

}  // namespace levybench
