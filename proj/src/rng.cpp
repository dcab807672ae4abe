#include "levybench/rng.hpp"

#include <cmath>
#include <limits>

#include "levybench/errors.hpp"

namespace levybench {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

using Block = std::array<std::uint32_t, 4>;

Block philox4x32_10(Block ctr, std::uint32_t k0, std::uint32_t k1) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ParameterError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

void RngStream::refill() {
  const Block ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                     static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const Block out = philox4x32_10(ctr, static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32));
  ++block_;
  buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  buffered_ = 2;
}

std::uint64_t RngStream::next_u64() {
  if (buffered_ == 0) refill();
  return buffer_[2 - buffered_--];
}

double RngStream::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::standard_normal() {
  if (spare_normal_) {
    const double value = *spare_normal_;
    spare_normal_.reset();
    return value;
  }
  // Marsaglia polar method.
  double x, y, r2;
  do {
    x = 2.0 * uniform() - 1.0;
    y = 2.0 * uniform() - 1.0;
    r2 = x * x + y * y;
  } while (r2 >= 1.0 || r2 == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(r2) / r2);
  spare_normal_ = y * factor;
  return x * factor;
}

std::uint64_t make_stream_id(std::uint16_t domain, std::uint64_t index) {
  constexpr std::uint64_t kIndexBits = 48;
  if (index >> kIndexBits) throw ParameterError("stream index exceeds 48 bits");
  return (static_cast<std::uint64_t>(domain) << kIndexBits) | index;
}

double sample_gaussian(RngStream& rng, double mean, double var) {
  require_positive(var, "variance");
  return mean + std::sqrt(var) * rng.standard_normal();
}

double sample_exponential(RngStream& rng, double scale) {
  require_positive(scale, "exponential scale");
  return -scale * std::log(rng.uniform());
}

double sample_gamma(RngStream& rng, double shape, double scale) {
  require_positive(shape, "gamma shape");
  require_positive(scale, "gamma scale");
  if (shape < 1.0) {
    // G(a) = G(a + 1) * U^(1/a)
    const double boosted = sample_gamma(rng, shape + 1.0, 1.0);
    return scale * boosted * std::exp(std::log(rng.uniform()) / shape);
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return scale * d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

namespace {

// Devroye (2014): draw Y with density proportional to
// y^(lambda-1) exp(-omega (y + 1/y) / 2), lambda >= 0, omega > 0.
double sample_gig_two_param(RngStream& rng, double lambda, double omega) {
  const double alpha = std::sqrt(lambda * lambda + omega * omega) - lambda;
  auto psi = [&](double x) { return -alpha * (std::cosh(x) - 1.0) - lambda * (std::expm1(x) - x); };
  auto dpsi = [&](double x) { return -alpha * std::sinh(x) - lambda * std::expm1(x); };

  double t;
  const double m1 = -psi(1.0);
  if (m1 > 2.0) {
    t = std::sqrt(2.0 / (alpha + lambda));
  } else if (m1 < 0.5) {
    t = std::log(4.0 / (alpha + 2.0 * lambda));
  } else {
    t = 1.0;
  }

  double s;
  const double mm1 = -psi(-1.0);
  if (mm1 > 2.0) {
    s = std::sqrt(4.0 / (alpha * std::cosh(1.0) + lambda));
  } else if (mm1 < 0.5) {
    const double inv_alpha = 1.0 / alpha;
    const double tail = std::log1p(inv_alpha + std::sqrt(inv_alpha * inv_alpha + 2.0 * inv_alpha));
    s = lambda > 0.0 ? std::min(1.0 / lambda, tail) : tail;
  } else {
    s = 1.0;
  }

  const double eta = -psi(t);
  const double zeta = -dpsi(t);
  const double theta = -psi(-s);
  const double xi = dpsi(-s);
  const double p = 1.0 / xi;
  const double r = 1.0 / zeta;
  const double t_prime = t - r * eta;
  const double s_prime = s - p * theta;
  const double q = t_prime + s_prime;
  const double total = p + q + r;

  auto chi = [&](double x) {
    if (x > t_prime) return std::exp(-eta - zeta * (x - t));
    if (x < -s_prime) return std::exp(-theta + xi * (x + s));
    return 1.0;
  };

  double x;
  for (;;) {
    const double u = rng.uniform();
    const double v = rng.uniform();
    const double w = rng.uniform();
    if (u < q / total) {
      x = -s_prime + q * v;
    } else if (u < (q + r) / total) {
      x = t_prime - r * std::log(v);
    } else {
      x = -s_prime + p * std::log(v);
    }
    if (w * chi(x) <= std::exp(psi(x))) break;
  }
  const double ratio = lambda / omega;
  return (ratio + std::sqrt(1.0 + ratio * ratio)) * std::exp(x);
}

}  // namespace

double sample_gig(RngStream& rng, const GigParams& p) {
  require_positive(p.lambda1, "GIG lambda1");
  if (!(p.lambda2 >= 0.0) || !std::isfinite(p.lambda2) || !std::isfinite(p.a)) {
    throw ParameterError("GIG lambda2 must be nonnegative and finite");
  }
  const double omega = std::sqrt(p.lambda1 * p.lambda2);
  if (p.lambda2 == 0.0 || omega < 1e-8) {
    if (p.a <= 0.0) {
      if (p.lambda2 == 0.0) throw ParameterError("GIG with lambda2 = 0 requires a > 0");
    } else {
      return sample_gamma(rng, p.a, 2.0 / p.lambda1);
    }
  }
  const double scale = std::sqrt(p.lambda2 / p.lambda1);
  if (p.a >= 0.0) return scale * sample_gig_two_param(rng, p.a, omega);
  // 1/Y ~ GIG(-a, omega) when Y ~ GIG(a, omega).
  return scale / sample_gig_two_param(rng, -p.a, omega);
}

int sample_bernoulli(RngStream& rng, double prob_one) {
  if (!(prob_one >= 0.0 && prob_one <= 1.0)) throw ParameterError("Bernoulli probability must lie in [0, 1]");
  return rng.uniform() < prob_one ? 1 : 0;
}

Vector sample_mvn_from_factor(RngStream& rng, const Eigen::LLT<Matrix>& factor, const Vector& linear_term) {
  const Eigen::Index k = linear_term.size();
  Vector z(k);
  for (Eigen::Index i = 0; i < k; ++i) z(i) = rng.standard_normal();
  Vector draw = factor.solve(linear_term);
  draw += factor.matrixU().solve(z);
  return draw;
}

Vector sample_mvn_from_precision(RngStream& rng, const Matrix& precision, const Vector& linear_term) {
  if (precision.rows() != precision.cols() || precision.rows() != linear_term.size()) {
    throw ParameterError("precision must be square and match the linear term");
  }
  Eigen::LLT<Matrix> factor(precision);
  if (factor.info() != Eigen::Success) throw SingularPrecisionError("precision matrix is not positive definite");
  return sample_mvn_from_factor(rng, factor, linear_term);
}

}  // namespace levybench
