#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "levybench/forward.hpp"
#include "levybench/processes.hpp"
#include "levybench/rng.hpp"

namespace levybench {

struct ChainConfig {
  std::size_t samples = 8000;  // retained post-burn-in draws (Q)
  std::size_t burn_in = 3000;  // discarded iterations (B)
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  bool store_samples = false;
};

void validate(const ChainConfig& cfg);

// Q/B defaults per increment law: 8000/3000 for Bernoulli-Laplace (also used
// for Laplace) and 15000/5000 for Student's t.
ChainConfig default_chain_config(const IdDistribution& dist);

struct ChainState {
  Vector u;
  Vector w;                     // strictly positive mixing variables
  std::vector<std::uint8_t> v;  // Bernoulli-Laplace support indicators, empty otherwise
};

struct MmseResult {
  Vector estimate;            // D^{-1} applied to increment_mean
  Vector increment_mean;      // mean of the retained u draws
  Vector standard_error;      // batch-means Monte Carlo standard error of estimate
  Vector effective_sample_size;  // per increment coordinate
  std::size_t iterations = 0;
  std::size_t positivity_violations = 0;  // non-positive or non-finite w draws
  double wall_seconds = 0.0;
  std::vector<double> log_posterior;  // unnormalized, one value per retained draw
  std::vector<Vector> samples;        // retained u draws when store_samples is set
};

// A = H D^{-1}: H applied after a cumulative sum; A^T applies H^T then a reverse cumulative sum.
Vector apply_A(const Matrix& H, const Vector& u);
Vector apply_A_transpose(const Matrix& H, const Vector& r);
// Dense A built from reverse cumulative column sums of H.
Matrix materialize_A(const Matrix& H);

// Quantities shared by all samplers for one (operator, measurement) pair.
struct PosteriorModel {
  PosteriorModel(const ProblemInstance& inst, const Vector& y);

  Matrix A;
  Matrix gram;  // A^T A
  Vector y;
  Vector aty_scaled;  // A^T y / sigma_n^2
  double noise_var;
};

class GibbsSampler {
 public:
  virtual ~GibbsSampler() = default;
  virtual void step(RngStream& rng, long iteration) = 0;
  const ChainState& state() const { return state_; }
  // log p(u | y) up to a constant; atoms contribute log(lambda) for Bernoulli-Laplace.
  double log_posterior() const;
  std::size_t positivity_violations() const { return positivity_violations_; }

 protected:
  GibbsSampler(std::shared_ptr<const PosteriorModel> model, IdDistribution prior);
  void check_positive(double w);

  std::shared_ptr<const PosteriorModel> model_;
  IdDistribution prior_;
  ChainState state_;
  std::size_t positivity_violations_ = 0;
};

// u | w ~ N(., (A^T A / sigma^2 + diag(1/w))^{-1}), then w_k | u_k ~ GIG(b^2, u_k^2, 1/2).
class LaplaceGibbs : public GibbsSampler {
 public:
  LaplaceGibbs(std::shared_ptr<const PosteriorModel> model, double b, RngStream& init_rng);
  void step(RngStream& rng, long iteration) override;

 private:
  double b_;
};

// Rate of the gamma conditional of w_k. The mixture representation gives
// (1 + u^2) / 2; AsPrinted uses the (1 + u)^2 / 2 form.
enum class StudentRate { MixtureConsistent, AsPrinted };

// u | w ~ N(., (A^T A / sigma^2 + diag(w))^{-1}), then
// w_k | u_k ~ gamma(shape (alpha + 1) / 2, scale 2 / (1 + u_k^2)).
class StudentGibbs : public GibbsSampler {
 public:
  StudentGibbs(std::shared_ptr<const PosteriorModel> model, double alpha, RngStream& init_rng,
               StudentRate rate = StudentRate::MixtureConsistent);
  void step(RngStream& rng, long iteration) override;

 private:
  double alpha_;
  StudentRate rate_;
};

// Partially collapsed sampler. Each iteration: (1) w given (u, v); (2) v_k for
// k = 1..K in turn from p(v_k | v_(-k), w, y) with u integrated out; (3) u
// given (v, w), zero off the support.
//
// The marginal likelihood terms use the precision form
//   P_S = diag(1/w_S) + A_S^T A_S / sigma^2,
// which by the determinant lemma and Woodbury gives, for flipping index k with
// the rest of the support S fixed,
//   h(1) - h(0) = log w_k + log d - e^2 / d + 2 log(lambda / (1 - lambda)),
// where d is the Schur complement of k in P_{S+k} and e the matching entry of
// the whitened A^T y / sigma^2. The Cholesky factor of P_S is updated in place
// (row append, row delete with a rank-one update) across the sweep and rebuilt
// from scratch for the u draw.
class BernoulliLaplaceGibbs : public GibbsSampler {
 public:
  BernoulliLaplaceGibbs(std::shared_ptr<const PosteriorModel> model, double lambda, double b, RngStream& init_rng);
  void step(RngStream& rng, long iteration) override;

  // Log odds h(1) - h(0) for index k given the current support without k.
  // Exposed for tests; rebuilds the factor.
  double flip_log_odds(Eigen::Index k);

 private:
  void rebuild_factor(long iteration);
  void remove_at(Eigen::Index position);
  // Schur complement data of k against the current factor.
  struct Candidate {
    Vector t;
    double d;
    double e;
  };
  Candidate candidate(Eigen::Index k, long iteration) const;
  void append(Eigen::Index k, const Candidate& c);

  double lambda_;
  double b_;
  double prior_log_odds_;  // 2 log(lambda / (1 - lambda))
  Matrix L_;               // lower Cholesky factor of P_S in factor order
  Vector whitened_;        // L^{-1} (A^T y / sigma^2)_S
  std::vector<Eigen::Index> order_;
  std::vector<Eigen::Index> position_;  // -1 when inactive
};

MmseResult run_chain(GibbsSampler& sampler, const ChainConfig& cfg, RngStream& rng);

MmseResult gibbs_laplace(RngStream& rng, const ProblemInstance& inst, const Vector& y, double b, const ChainConfig& cfg);
MmseResult gibbs_student(RngStream& rng, const ProblemInstance& inst, const Vector& y, double alpha, const ChainConfig& cfg,
                         StudentRate rate = StudentRate::MixtureConsistent);
MmseResult gibbs_bernoulli_laplace(RngStream& rng, const ProblemInstance& inst, const Vector& y, double lambda, double b,
                                   const ChainConfig& cfg);

// Dispatches on the increment law. Gaussian increments have a closed-form
// posterior mean and are rejected here.
MmseResult gibbs_mmse(RngStream& rng, const ProblemInstance& inst, const Vector& y, const IdDistribution& dist,
                      const ChainConfig& cfg, StudentRate rate = StudentRate::MixtureConsistent);

// Writes stored samples (rows) and the log-posterior trace to the dataset container format.
void export_chain_trace(const MmseResult& result, const std::filesystem::path& path);

}  // namespace levybench
