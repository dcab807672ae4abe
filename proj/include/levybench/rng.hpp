#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace levybench {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Counter-based Philox4x32-10 stream. The key is the 64-bit seed; the upper
// half of the 128-bit counter holds the stream id and the lower half counts
// blocks, so distinct (seed, stream id) pairs never share a counter value.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double standard_normal();

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  std::optional<double> spare_normal_;
};

// Stream ids are a 16-bit domain tag over a 48-bit index.
std::uint64_t make_stream_id(std::uint16_t domain, std::uint64_t index);

struct GigParams {
  double lambda1;  // coefficient of x
  double lambda2;  // coefficient of 1/x
  double a;        // order
};

double sample_gaussian(RngStream& rng, double mean, double var);
double sample_exponential(RngStream& rng, double scale);
double sample_gamma(RngStream& rng, double shape, double scale);
// Density proportional to x^(a-1) exp(-(lambda1 x + lambda2 / x) / 2) on x > 0.
double sample_gig(RngStream& rng, const GigParams& p);
int sample_bernoulli(RngStream& rng, double prob_one);

// Draw from N(P^{-1} m, P^{-1}) given the precision P. Throws
// SingularPrecisionError when P is not numerically positive definite.
Vector sample_mvn_from_precision(RngStream& rng, const Matrix& precision, const Vector& linear_term);

// Same draw with a precomputed lower Cholesky factor of the precision.
Vector sample_mvn_from_factor(RngStream& rng, const Eigen::LLT<Matrix>& factor, const Vector& linear_term);

}  // namespace levybench
