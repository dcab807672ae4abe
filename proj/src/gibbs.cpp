#include "levybench/gibbs.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "levybench/container.hpp"
#include "levybench/errors.hpp"

namespace levybench {

void validate(const ChainConfig& cfg) {
  if (cfg.samples < 1) throw ParameterError("chain needs at least one retained sample");
  if (cfg.thinning < 1) throw ParameterError("thinning must be at least 1");
}

ChainConfig default_chain_config(const IdDistribution& dist) {
  ChainConfig cfg;
  if (std::holds_alternative<StudentIncrements>(dist)) {
    cfg.samples = 15000;
    cfg.burn_in = 5000;
  } else {
    cfg.samples = 8000;
    cfg.burn_in = 3000;
  }
  return cfg;
}

Vector apply_A(const Matrix& H, const Vector& u) {
  if (u.size() != H.cols()) throw ParameterError("increment length does not match operator");
  return H * cumulative_sum(u);
}

Vector apply_A_transpose(const Matrix& H, const Vector& r) {
  if (r.size() != H.rows()) throw ParameterError("residual length does not match operator");
  Vector g = H.transpose() * r;
  for (Eigen::Index k = g.size() - 2; k >= 0; --k) g(k) += g(k + 1);
  return g;
}

Matrix materialize_A(const Matrix& H) {
  Matrix A = H;
  for (Eigen::Index k = A.cols() - 2; k >= 0; --k) A.col(k) += A.col(k + 1);
  return A;
}

PosteriorModel::PosteriorModel(const ProblemInstance& inst, const Vector& measurements)
    : A(materialize_A(inst.H)), gram(A.transpose() * A), y(measurements), noise_var(inst.noise_var) {
  if (y.size() != A.rows()) throw ParameterError("measurement length does not match operator");
  if (!(noise_var > 0.0)) throw ParameterError("noise variance must be positive");
  aty_scaled = A.transpose() * y / noise_var;
}

GibbsSampler::GibbsSampler(std::shared_ptr<const PosteriorModel> model, IdDistribution prior)
    : model_(std::move(model)), prior_(std::move(prior)) {
  validate(prior_);
  const Eigen::Index k = model_->A.cols();
  state_.u = Vector::Zero(k);
  state_.w = Vector::Ones(k);
}

void GibbsSampler::check_positive(double w) {
  if (!(w > 0.0) || !std::isfinite(w)) ++positivity_violations_;
}

double GibbsSampler::log_posterior() const {
  const Vector residual = model_->y - model_->A * state_.u;
  double value = -0.5 * residual.squaredNorm() / model_->noise_var;
  const auto* bl = std::get_if<BernoulliLaplaceIncrements>(&prior_);
  for (Eigen::Index k = 0; k < state_.u.size(); ++k) {
    value += (bl && state_.u(k) == 0.0) ? std::log(bl->lambda) : increment_log_pdf(prior_, state_.u(k));
  }
  return value;
}

namespace {

// Draws u ~ N(P^{-1} z, P^{-1}) with P = gram / sigma^2 + diag(diag).
Vector draw_gaussian_increments(RngStream& rng, const PosteriorModel& model, const Vector& diag, long iteration) {
  Matrix precision = model.gram / model.noise_var;
  precision.diagonal() += diag;
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw SingularPrecisionError("u-conditional precision is not positive definite", iteration);
  return sample_mvn_from_factor(rng, llt, model.aty_scaled);
}

}  // namespace

LaplaceGibbs::LaplaceGibbs(std::shared_ptr<const PosteriorModel> model, double b, RngStream& init_rng)
    : GibbsSampler(std::move(model), make_laplace(b)), b_(b) {
  for (Eigen::Index k = 0; k < state_.w.size(); ++k) state_.w(k) = sample_exponential(init_rng, 2.0 / (b_ * b_));
}

void LaplaceGibbs::step(RngStream& rng, long iteration) {
  state_.u = draw_gaussian_increments(rng, *model_, state_.w.cwiseInverse(), iteration);
  for (Eigen::Index k = 0; k < state_.w.size(); ++k) {
    const double u = state_.u(k);
    state_.w(k) = sample_gig(rng, GigParams{b_ * b_, u * u, 0.5});
    check_positive(state_.w(k));
  }
}

StudentGibbs::StudentGibbs(std::shared_ptr<const PosteriorModel> model, double alpha, RngStream& init_rng, StudentRate rate)
    : GibbsSampler(std::move(model), make_student(alpha)), alpha_(alpha), rate_(rate) {
  for (Eigen::Index k = 0; k < state_.w.size(); ++k) state_.w(k) = sample_gamma(init_rng, 0.5 * alpha_, 2.0);
}

void StudentGibbs::step(RngStream& rng, long iteration) {
  state_.u = draw_gaussian_increments(rng, *model_, state_.w, iteration);
  const double shape = 0.5 * (alpha_ + 1.0);
  for (Eigen::Index k = 0; k < state_.w.size(); ++k) {
    const double u = state_.u(k);
    const double spread = rate_ == StudentRate::MixtureConsistent ? 1.0 + u * u : (1.0 + u) * (1.0 + u);
    state_.w(k) = sample_gamma(rng, shape, 2.0 / spread);
    check_positive(state_.w(k));
  }
}

BernoulliLaplaceGibbs::BernoulliLaplaceGibbs(std::shared_ptr<const PosteriorModel> model, double lambda, double b,
                                             RngStream& init_rng)
    : GibbsSampler(std::move(model), make_bernoulli_laplace(lambda, b)),
      lambda_(lambda),
      b_(b),
      prior_log_odds_(2.0 * std::log(lambda / (1.0 - lambda))) {
  const Eigen::Index k = state_.u.size();
  for (Eigen::Index i = 0; i < k; ++i) state_.w(i) = sample_exponential(init_rng, 2.0 / (b_ * b_));
  state_.v.assign(static_cast<std::size_t>(k), 1);
  L_ = Matrix::Zero(k, k);
  whitened_ = Vector::Zero(k);
  position_.assign(static_cast<std::size_t>(k), -1);
}

void BernoulliLaplaceGibbs::rebuild_factor(long iteration) {
  const PosteriorModel& m = *model_;
  order_.clear();
  std::fill(position_.begin(), position_.end(), -1);
  for (Eigen::Index k = 0; k < state_.u.size(); ++k) {
    if (state_.v[static_cast<std::size_t>(k)]) {
      position_[static_cast<std::size_t>(k)] = static_cast<Eigen::Index>(order_.size());
      order_.push_back(k);
    }
  }
  const auto n = static_cast<Eigen::Index>(order_.size());
  if (n == 0) return;
  Matrix precision(n, n);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index ki = order_[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) precision(i, j) = m.gram(ki, order_[static_cast<std::size_t>(j)]) / m.noise_var;
    precision(i, i) += 1.0 / state_.w(ki);
    z(i) = m.aty_scaled(ki);
  }
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw SingularPrecisionError("support precision is not positive definite", iteration);
  L_.topLeftCorner(n, n) = llt.matrixL();
  whitened_.head(n) = L_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(z);
}

void BernoulliLaplaceGibbs::remove_at(Eigen::Index j) {
  const auto n = static_cast<Eigen::Index>(order_.size());
  const Eigen::Index tail = n - j - 1;
  // L L^T without row/column j equals the factor whose trailing block absorbs
  // the deleted column through a rank-one update.
  Vector x = L_.block(j + 1, j, tail, 1);
  for (Eigen::Index c = 0; c < tail; ++c) {
    const Eigen::Index kk = j + 1 + c;
    const double lkk = L_(kk, kk);
    const double r = std::hypot(lkk, x(c));
    const double cs = r / lkk;
    const double sn = x(c) / lkk;
    L_(kk, kk) = r;
    for (Eigen::Index i = c + 1; i < tail; ++i) {
      const Eigen::Index ii = j + 1 + i;
      L_(ii, kk) = (L_(ii, kk) + sn * x(i)) / cs;
      x(i) = cs * x(i) - sn * L_(ii, kk);
    }
  }
  for (Eigen::Index r = j + 1; r < n; ++r) {
    for (Eigen::Index c = 0; c < j; ++c) L_(r - 1, c) = L_(r, c);
    for (Eigen::Index c = j + 1; c <= r; ++c) L_(r - 1, c - 1) = L_(r, c);
  }
  const Eigen::Index removed = order_[static_cast<std::size_t>(j)];
  position_[static_cast<std::size_t>(removed)] = -1;
  order_.erase(order_.begin() + j);
  for (std::size_t i = static_cast<std::size_t>(j); i < order_.size(); ++i) {
    position_[static_cast<std::size_t>(order_[i])] = static_cast<Eigen::Index>(i);
  }
  const Eigen::Index m = n - 1;
  if (m > 0) {
    Vector z(m);
    for (Eigen::Index i = 0; i < m; ++i) z(i) = model_->aty_scaled(order_[static_cast<std::size_t>(i)]);
    whitened_.head(m) = L_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solve(z);
  }
}

BernoulliLaplaceGibbs::Candidate BernoulliLaplaceGibbs::candidate(Eigen::Index k, long iteration) const {
  const PosteriorModel& m = *model_;
  const auto n = static_cast<Eigen::Index>(order_.size());
  Candidate c;
  c.t.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) c.t(i) = m.gram(order_[static_cast<std::size_t>(i)], k) / m.noise_var;
  if (n > 0) L_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(c.t);
  c.d = m.gram(k, k) / m.noise_var + 1.0 / state_.w(k) - c.t.squaredNorm();
  if (!(c.d > 0.0) || !std::isfinite(c.d)) {
    throw SingularPrecisionError("non-positive Schur complement while updating the support factor", iteration);
  }
  c.e = m.aty_scaled(k) - (n > 0 ? c.t.dot(whitened_.head(n)) : 0.0);
  return c;
}

void BernoulliLaplaceGibbs::append(Eigen::Index k, const Candidate& c) {
  const auto n = static_cast<Eigen::Index>(order_.size());
  if (n > 0) L_.block(n, 0, 1, n) = c.t.transpose();
  const double root = std::sqrt(c.d);
  L_(n, n) = root;
  whitened_(n) = c.e / root;
  position_[static_cast<std::size_t>(k)] = n;
  order_.push_back(k);
}

double BernoulliLaplaceGibbs::flip_log_odds(Eigen::Index k) {
  rebuild_factor(-1);
  const Eigen::Index pos = position_[static_cast<std::size_t>(k)];
  if (pos >= 0) remove_at(pos);
  const Candidate c = candidate(k, -1);
  const double odds = std::log(state_.w(k)) + std::log(c.d) - c.e * c.e / c.d + prior_log_odds_;
  rebuild_factor(-1);
  return odds;
}

void BernoulliLaplaceGibbs::step(RngStream& rng, long iteration) {
  const Eigen::Index k_len = state_.u.size();
  const double exp_scale = 2.0 / (b_ * b_);

  for (Eigen::Index k = 0; k < k_len; ++k) {
    const double u = state_.u(k);
    state_.w(k) = state_.v[static_cast<std::size_t>(k)] ? sample_gig(rng, GigParams{b_ * b_, u * u, 0.5})
                                                        : sample_exponential(rng, exp_scale);
    check_positive(state_.w(k));
  }

  rebuild_factor(iteration);
  for (Eigen::Index k = 0; k < k_len; ++k) {
    const Eigen::Index pos = position_[static_cast<std::size_t>(k)];
    if (pos >= 0) remove_at(pos);
    const Candidate c = candidate(k, iteration);
    const double log_odds = std::log(state_.w(k)) + std::log(c.d) - c.e * c.e / c.d + prior_log_odds_;
    // P(v_k = 1) = 1 / (1 + exp((h(1) - h(0)) / 2))
    const double prob_one = 1.0 / (1.0 + std::exp(0.5 * log_odds));
    const int v = sample_bernoulli(rng, prob_one);
    state_.v[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(v);
    if (v) append(k, c);
  }

  rebuild_factor(iteration);
  state_.u.setZero();
  const auto n = static_cast<Eigen::Index>(order_.size());
  if (n == 0) return;
  Vector xi(n);
  for (Eigen::Index i = 0; i < n; ++i) xi(i) = rng.standard_normal();
  const Vector draw = L_.topLeftCorner(n, n).triangularView<Eigen::Lower>().transpose().solve(whitened_.head(n) + xi);
  for (Eigen::Index i = 0; i < n; ++i) state_.u(order_[static_cast<std::size_t>(i)]) = draw(i);
}

MmseResult run_chain(GibbsSampler& sampler, const ChainConfig& cfg, RngStream& rng) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index k = sampler.state().u.size();
  const std::size_t q = cfg.samples;
  const std::size_t batches = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(q))));
  const std::size_t batch_size = q / batches;

  Vector sum = Vector::Zero(k);
  Vector sum_sq = Vector::Zero(k);
  Matrix batch_sums = Matrix::Zero(k, static_cast<Eigen::Index>(batches));
  MmseResult result;
  result.log_posterior.reserve(q);
  if (cfg.store_samples) result.samples.reserve(q);

  const std::size_t total = cfg.burn_in + q * cfg.thinning;
  for (std::size_t it = 0; it < total; ++it) {
    sampler.step(rng, static_cast<long>(it));
    if (it < cfg.burn_in || (it - cfg.burn_in) % cfg.thinning != 0) continue;
    const std::size_t idx = (it - cfg.burn_in) / cfg.thinning;
    const Vector& u = sampler.state().u;
    sum += u;
    sum_sq += u.cwiseProduct(u);
    const std::size_t batch = idx / batch_size;
    if (batch < batches) batch_sums.col(static_cast<Eigen::Index>(batch)) += u;
    result.log_posterior.push_back(sampler.log_posterior());
    if (cfg.store_samples) result.samples.push_back(u);
  }

  const double qd = static_cast<double>(q);
  result.iterations = total;
  result.increment_mean = sum / qd;
  result.estimate = cumulative_sum(result.increment_mean);
  result.positivity_violations = sampler.positivity_violations();

  const Vector var_u =
      q > 1 ? Vector(((sum_sq / qd) - result.increment_mean.cwiseProduct(result.increment_mean)).cwiseMax(0.0) * (qd / (qd - 1.0)))
            : Vector(Vector::Zero(k));
  Matrix batch_means_u = batch_sums / static_cast<double>(batch_size);
  Matrix batch_means_s = batch_means_u;
  for (Eigen::Index c = 0; c < batch_means_s.cols(); ++c) batch_means_s.col(c) = cumulative_sum(batch_means_u.col(c));

  result.standard_error = Vector::Zero(k);
  result.effective_sample_size = Vector::Constant(k, qd);
  if (batches > 1) {
    const double nb = static_cast<double>(batches);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double mean_s = batch_means_s.row(i).mean();
      const double var_s = (batch_means_s.row(i).array() - mean_s).square().sum() / (nb - 1.0);
      result.standard_error(i) = std::sqrt(var_s / nb);
      const double mean_u = batch_means_u.row(i).mean();
      const double var_bu = (batch_means_u.row(i).array() - mean_u).square().sum() / (nb - 1.0);
      if (var_bu > 0.0) {
        result.effective_sample_size(i) = std::min(qd, qd * var_u(i) / (static_cast<double>(batch_size) * var_bu));
      }
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

MmseResult gibbs_laplace(RngStream& rng, const ProblemInstance& inst, const Vector& y, double b, const ChainConfig& cfg) {
  LaplaceGibbs sampler(std::make_shared<PosteriorModel>(inst, y), b, rng);
  return run_chain(sampler, cfg, rng);
}

MmseResult gibbs_student(RngStream& rng, const ProblemInstance& inst, const Vector& y, double alpha, const ChainConfig& cfg,
                         StudentRate rate) {
  StudentGibbs sampler(std::make_shared<PosteriorModel>(inst, y), alpha, rng, rate);
  return run_chain(sampler, cfg, rng);
}

MmseResult gibbs_bernoulli_laplace(RngStream& rng, const ProblemInstance& inst, const Vector& y, double lambda, double b,
                                   const ChainConfig& cfg) {
  BernoulliLaplaceGibbs sampler(std::make_shared<PosteriorModel>(inst, y), lambda, b, rng);
  return run_chain(sampler, cfg, rng);
}

MmseResult gibbs_mmse(RngStream& rng, const ProblemInstance& inst, const Vector& y, const IdDistribution& dist,
                      const ChainConfig& cfg, StudentRate rate) {
  if (const auto* l = std::get_if<LaplaceIncrements>(&dist)) return gibbs_laplace(rng, inst, y, l->b, cfg);
  if (const auto* s = std::get_if<StudentIncrements>(&dist)) return gibbs_student(rng, inst, y, s->alpha, cfg, rate);
  if (const auto* bl = std::get_if<BernoulliLaplaceIncrements>(&dist)) {
    return gibbs_bernoulli_laplace(rng, inst, y, bl->lambda, bl->b, cfg);
  }
  throw ParameterError("no Gibbs sampler for Gaussian increments; the l2 estimator is the posterior mean");
}

void export_chain_trace(const MmseResult& result, const std::filesystem::path& path) {
  Container c;
  const auto k = static_cast<std::size_t>(result.estimate.size());
  c.header = {{"format", "levybench-chain-trace"},
              {"version", kContainerVersion},
              {"signal_length", k},
              {"stored_samples", result.samples.size()},
              {"trace_length", result.log_posterior.size()},
              {"iterations", result.iterations},
              {"layout", "estimate[K]; log_posterior[trace_length]; samples[stored_samples][K] (increments)"}};
  c.payload.assign(result.estimate.data(), result.estimate.data() + result.estimate.size());
  c.payload.insert(c.payload.end(), result.log_posterior.begin(), result.log_posterior.end());
  for (const auto& u : result.samples) c.payload.insert(c.payload.end(), u.data(), u.data() + u.size());
  write_container(path, c);
}

}  // namespace levybench
