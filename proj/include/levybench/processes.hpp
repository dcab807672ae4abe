#pragma once

#include <cstddef>
#include <string>
#include <variant>

#include "levybench/rng.hpp"

namespace levybench {

// Increment laws of the Levy processes. Construct through the make_* helpers,
// which validate the parameter ranges.
struct GaussianIncrements {
  double variance;
};
struct LaplaceIncrements {
  double b;  // density (b/2) exp(-b|x|)
};
struct BernoulliLaplaceIncrements {
  double lambda;  // mass at the origin
  double b;
};
// Unit-scale Student's t: density proportional to (1 + x^2)^(-(alpha+1)/2).
struct StudentIncrements {
  double alpha;
};

using IdDistribution = std::variant<GaussianIncrements, LaplaceIncrements, BernoulliLaplaceIncrements, StudentIncrements>;

IdDistribution make_gaussian(double variance);
IdDistribution make_laplace(double b);
IdDistribution make_bernoulli_laplace(double lambda, double b);
IdDistribution make_student(double alpha);

void validate(const IdDistribution& dist);
std::string describe(const IdDistribution& dist);

double sample_increment(RngStream& rng, const IdDistribution& dist);

struct LevySample {
  Vector signal;
  Vector increments;
};

// s_k = u_1 + ... + u_k with i.i.d. increments.
LevySample generate_signal(RngStream& rng, const IdDistribution& dist, std::size_t length);

Vector cumulative_sum(const Vector& increments);
// u_1 = s_1, u_k = s_k - s_{k-1}.
Vector finite_difference(const Vector& signal);

// Log prior of a signal. For Bernoulli-Laplace the density is taken with
// respect to Lebesgue measure plus a unit atom at zero: `continuous` sums
// log((1-lambda) Laplace(u)) over the nonzero increments and `atom_count`
// reports how many increments are exactly zero.
struct PriorLogDensity {
  double continuous = 0.0;
  std::size_t atom_count = 0;
  // continuous + atom_count * log(lambda) for Bernoulli-Laplace; continuous otherwise.
  double mixed_measure_total = 0.0;
};

PriorLogDensity log_prior(const Vector& signal, const IdDistribution& dist);

// Density of the absolutely continuous part (for Bernoulli-Laplace, the
// (1-lambda)-weighted Laplace part) and the full CDF including any atom.
double increment_log_pdf(const IdDistribution& dist, double x);
double increment_cdf(const IdDistribution& dist, double x);
double increment_variance(const IdDistribution& dist);

}  // namespace levybench
