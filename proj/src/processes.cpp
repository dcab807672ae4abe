#include "levybench/processes.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "levybench/errors.hpp"

namespace levybench {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

double laplace_log_pdf(double b, double x) { return std::log(0.5 * b) - b * std::abs(x); }

double laplace_cdf(double b, double x) {
  return x < 0.0 ? 0.5 * std::exp(b * x) : 1.0 - 0.5 * std::exp(-b * x);
}

double sample_laplace(RngStream& rng, double b) {
  const double magnitude = sample_exponential(rng, 1.0 / b);
  return rng.uniform() < 0.5 ? -magnitude : magnitude;
}

}  // namespace

IdDistribution make_gaussian(double variance) {
  IdDistribution d = GaussianIncrements{variance};
  validate(d);
  return d;
}

IdDistribution make_laplace(double b) {
  IdDistribution d = LaplaceIncrements{b};
  validate(d);
  return d;
}

IdDistribution make_bernoulli_laplace(double lambda, double b) {
  IdDistribution d = BernoulliLaplaceIncrements{lambda, b};
  validate(d);
  return d;
}

IdDistribution make_student(double alpha) {
  IdDistribution d = StudentIncrements{alpha};
  validate(d);
  return d;
}

void validate(const IdDistribution& dist) {
  std::visit(Overloaded{
                 [](const GaussianIncrements& g) {
                   if (!positive_finite(g.variance)) throw ParameterError("gaussian variance must be positive");
                 },
                 [](const LaplaceIncrements& l) {
                   if (!positive_finite(l.b)) throw ParameterError("laplace b must be positive");
                 },
                 [](const BernoulliLaplaceIncrements& bl) {
                   if (!(bl.lambda > 0.0 && bl.lambda < 1.0)) throw ParameterError("lambda must lie in (0, 1)");
                   if (!positive_finite(bl.b)) throw ParameterError("bernoulli-laplace b must be positive");
                 },
                 [](const StudentIncrements& s) {
                   if (!positive_finite(s.alpha)) throw ParameterError("student alpha must be positive");
                 },
             },
             dist);
}

std::string describe(const IdDistribution& dist) {
  std::ostringstream out;
  out.precision(17);
  std::visit(Overloaded{
                 [&](const GaussianIncrements& g) { out << "gaussian(variance=" << g.variance << ")"; },
                 [&](const LaplaceIncrements& l) { out << "laplace(b=" << l.b << ")"; },
                 [&](const BernoulliLaplaceIncrements& bl) {
                   out << "bernoulli_laplace(lambda=" << bl.lambda << ", b=" << bl.b << ")";
                 },
                 [&](const StudentIncrements& s) { out << "student(alpha=" << s.alpha << ")"; },
             },
             dist);
  return out.str();
}

double sample_increment(RngStream& rng, const IdDistribution& dist) {
  return std::visit(Overloaded{
                        [&](const GaussianIncrements& g) { return sample_gaussian(rng, 0.0, g.variance); },
                        [&](const LaplaceIncrements& l) { return sample_laplace(rng, l.b); },
                        [&](const BernoulliLaplaceIncrements& bl) {
                          if (rng.uniform() < bl.lambda) return 0.0;
                          return sample_laplace(rng, bl.b);
                        },
                        [&](const StudentIncrements& s) {
                          // Gaussian scale mixture with gamma(alpha/2, 2) precision.
                          const double precision = sample_gamma(rng, 0.5 * s.alpha, 2.0);
                          return rng.standard_normal() / std::sqrt(precision);
                        },
                    },
                    dist);
}

LevySample generate_signal(RngStream& rng, const IdDistribution& dist, std::size_t length) {
  if (length == 0) throw ParameterError("signal length must be at least 1");
  LevySample out;
  out.increments.resize(static_cast<Eigen::Index>(length));
  for (Eigen::Index k = 0; k < out.increments.size(); ++k) out.increments(k) = sample_increment(rng, dist);
  out.signal = cumulative_sum(out.increments);
  return out;
}

Vector cumulative_sum(const Vector& increments) {
  Vector s(increments.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < increments.size(); ++k) {
    acc += increments(k);
    s(k) = acc;
  }
  return s;
}

Vector finite_difference(const Vector& signal) {
  Vector u(signal.size());
  for (Eigen::Index k = 0; k < signal.size(); ++k) u(k) = k == 0 ? signal(0) : signal(k) - signal(k - 1);
  return u;
}

double increment_log_pdf(const IdDistribution& dist, double x) {
  return std::visit(Overloaded{
                        [&](const GaussianIncrements& g) {
                          return -0.5 * std::log(2.0 * M_PI * g.variance) - 0.5 * x * x / g.variance;
                        },
                        [&](const LaplaceIncrements& l) { return laplace_log_pdf(l.b, x); },
                        [&](const BernoulliLaplaceIncrements& bl) {
                          return std::log1p(-bl.lambda) + laplace_log_pdf(bl.b, x);
                        },
                        [&](const StudentIncrements& s) {
                          return std::lgamma(0.5 * (s.alpha + 1.0)) - std::lgamma(0.5 * s.alpha) -
                                 0.5 * std::log(M_PI) - 0.5 * (s.alpha + 1.0) * std::log1p(x * x);
                        },
                    },
                    dist);
}

double increment_cdf(const IdDistribution& dist, double x) {
  return std::visit(Overloaded{
                        [&](const GaussianIncrements& g) { return 0.5 * std::erfc(-x / std::sqrt(2.0 * g.variance)); },
                        [&](const LaplaceIncrements& l) { return laplace_cdf(l.b, x); },
                        [&](const BernoulliLaplaceIncrements& bl) {
                          const double atom = x >= 0.0 ? bl.lambda : 0.0;
                          return atom + (1.0 - bl.lambda) * laplace_cdf(bl.b, x);
                        },
                        [&](const StudentIncrements& s) {
                          // Unit-scale form is a standard t variate divided by sqrt(alpha).
                          const boost::math::students_t_distribution<double> t(s.alpha);
                          return boost::math::cdf(t, x * std::sqrt(s.alpha));
                        },
                    },
                    dist);
}

double increment_variance(const IdDistribution& dist) {
  return std::visit(Overloaded{
                        [](const GaussianIncrements& g) { return g.variance; },
                        [](const LaplaceIncrements& l) { return 2.0 / (l.b * l.b); },
                        [](const BernoulliLaplaceIncrements& bl) { return (1.0 - bl.lambda) * 2.0 / (bl.b * bl.b); },
                        [](const StudentIncrements& s) {
                          return s.alpha > 2.0 ? 1.0 / (s.alpha - 2.0) : std::numeric_limits<double>::infinity();
                        },
                    },
                    dist);
}

PriorLogDensity log_prior(const Vector& signal, const IdDistribution& dist) {
  const Vector u = finite_difference(signal);
  PriorLogDensity out;
  const auto* bl = std::get_if<BernoulliLaplaceIncrements>(&dist);
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (bl && u(k) == 0.0) {
      ++out.atom_count;
      continue;
    }
    out.continuous += increment_log_pdf(dist, u(k));
  }
  out.mixed_measure_total = out.continuous;
  if (bl) out.mixed_measure_total += static_cast<double>(out.atom_count) * std::log(bl->lambda);
  return out;
}

}  // namespace levybench
