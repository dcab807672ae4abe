#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include <boost/math/distributions/students_t.hpp>

#include "levybench/container.hpp"
#include "levybench/errors.hpp"
#include "levybench/forward.hpp"
#include "levybench/gibbs.hpp"
#include "oracles.hpp"

using namespace levybench;

namespace {

ChainConfig chain(std::size_t samples, std::size_t burn_in, std::size_t thinning = 1) {
  ChainConfig cfg;
  cfg.samples = samples;
  cfg.burn_in = burn_in;
  cfg.thinning = thinning;
  return cfg;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

double laplace_cdf(double b, double x) { return x < 0 ? 0.5 * std::exp(b * x) : 1.0 - 0.5 * std::exp(-b * x); }

}  // namespace

TEST_CASE("A is H composed with the cumulative sum") {
  const auto inst = build_deconvolution(20, 5, 1.5);
  CHECK((apply_A(inst.H, Vector::Unit(20, 0)) - inst.H * Vector::Ones(20)).cwiseAbs().maxCoeff() < 1e-14);

  RngStream rng(1);
  Vector u(20), r(16);
  for (auto& x : u) x = rng.standard_normal();
  for (auto& x : r) x = rng.standard_normal();
  CHECK(std::abs(apply_A(inst.H, u).dot(r) - u.dot(apply_A_transpose(inst.H, r))) < 1e-10);

  const Matrix A = materialize_A(inst.H);
  for (Eigen::Index k = 0; k < 20; ++k) {
    CHECK((A.col(k) - apply_A(inst.H, Vector::Unit(20, k))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("chain configuration") {
  CHECK(default_chain_config(make_bernoulli_laplace(0.8, 1.0)).samples == 8000);
  CHECK(default_chain_config(make_bernoulli_laplace(0.8, 1.0)).burn_in == 3000);
  CHECK(default_chain_config(make_laplace(1.0)).samples == 8000);
  CHECK(default_chain_config(make_student(3.0)).samples == 15000);
  CHECK(default_chain_config(make_student(3.0)).burn_in == 5000);
  CHECK_THROWS_AS(validate(chain(0, 10)), ParameterError);
  CHECK_THROWS_AS(validate(chain(10, 10, 0)), ParameterError);

  const auto inst = build_custom(Matrix::Identity(3, 3), "identity", 1.0);
  RngStream rng(2);
  CHECK_THROWS_AS(gibbs_mmse(rng, inst, Vector::Zero(3), make_gaussian(1.0), chain(10, 0)), ParameterError);
  CHECK_THROWS_AS(gibbs_mmse(rng, build_custom(Matrix::Identity(3, 3), "identity", 0.0), Vector::Zero(3), make_laplace(1.0),
                             chain(10, 0)),
                  ParameterError);
}

TEST_CASE("single-sample symmetry") {
  const auto inst = build_custom(Matrix::Identity(1, 1), "identity", 1.0);
  RngStream rng(3);
  const auto r = gibbs_mmse(rng, inst, Vector::Zero(1), make_laplace(1.0), chain(100000, 1000));
  CHECK(std::abs(r.estimate(0)) < 4.0 * r.standard_error(0));
  CHECK(r.positivity_violations == 0);
}

TEST_CASE("two-sample posterior means match quadrature") {
  const auto inst = build_custom(Matrix::Identity(2, 2), "identity", 1.0);

  SUBCASE("Laplace") {
    const auto ref = oracle::posterior_mean_k2([](double x) { return oracle::laplace_pdf(1.0, x); }, {2.0, 1.0}, 1.0);
    RngStream rng(4);
    const auto r = gibbs_laplace(rng, inst, vec2(2.0, 1.0), 1.0, chain(300000, 2000));
    CHECK(std::abs(r.estimate(0) - ref[0]) < 0.01);
    CHECK(std::abs(r.estimate(1) - ref[1]) < 0.01);
  }
  SUBCASE("Student") {
    const auto ref = oracle::posterior_mean_k2([](double x) { return oracle::student_pdf(3.0, x); }, {1.0, -1.0}, 1.0);
    RngStream rng(5);
    const auto r = gibbs_student(rng, inst, vec2(1.0, -1.0), 3.0, chain(300000, 2000));
    CHECK(std::abs(r.estimate(0) - ref[0]) < 0.01);
    CHECK(std::abs(r.estimate(1) - ref[1]) < 0.01);
  }
  SUBCASE("Bernoulli-Laplace") {
    const auto ref = oracle::bl_posterior_k2(0.8, 1.0, {2.0, 1.0}, 1.0);
    RngStream rng(6);
    const auto r = gibbs_bernoulli_laplace(rng, inst, vec2(2.0, 1.0), 0.8, 1.0, chain(300000, 2000));
    CHECK(std::abs(r.estimate(0) - ref.mean[0]) < 0.01);
    CHECK(std::abs(r.estimate(1) - ref.mean[1]) < 0.01);
  }
}

TEST_CASE("three-sample Bernoulli-Laplace mean matches support enumeration") {
  const auto inst = build_custom(Matrix::Identity(3, 3), "identity", 1.0);
  Vector y(3);
  y << 1.5, 0.5, 2.0;
  const Vector ref = oracle::bl_posterior_mean(0.7, 1.0, y, 1.0, 7.0, 0.035);
  RngStream rng(7);
  const auto r = gibbs_bernoulli_laplace(rng, inst, y, 0.7, 1.0, chain(300000, 2000));
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(r.estimate(k) - ref(k)) < 0.01);
}

TEST_CASE("support indicator frequencies match the enumerated posterior") {
  auto inst = build_custom(Matrix::Identity(2, 2), "identity", 0.01);
  const auto ref = oracle::bl_posterior_k2(0.8, 1.0, {5.0, 5.0}, 0.01, 10.0, 0.002);
  RngStream rng(8);
  BernoulliLaplaceGibbs sampler(std::make_shared<PosteriorModel>(inst, vec2(5.0, 5.0)), 0.8, 1.0, rng);
  double v1 = 0.0, v2 = 0.0;
  const int n = 100000;
  for (int it = 0; it < 1000 + n; ++it) {
    sampler.step(rng, it);
    if (it < 1000) continue;
    v1 += sampler.state().v[0];
    v2 += sampler.state().v[1];
  }
  CHECK(std::abs(v1 / n - ref.prob_v1()) < 0.02);
  CHECK(std::abs(v2 / n - ref.prob_v2()) < 0.02);
}

TEST_CASE("collapsed flip odds match a dense measurement-space computation") {
  auto inst = build_deconvolution(12, 3, 1.0);
  inst.noise_var = 0.05;
  RngStream rng(9);
  const Vector s = generate_signal(rng, make_bernoulli_laplace(0.6, 1.0), 12).signal;
  const Vector y = simulate_measurements(rng, inst, s);
  auto model = std::make_shared<PosteriorModel>(inst, y);
  BernoulliLaplaceGibbs sampler(model, 0.6, 1.0, rng);
  for (int it = 0; it < 5; ++it) {
    sampler.step(rng, it);
    const auto& st = sampler.state();
    for (Eigen::Index k = 0; k < 12; ++k) {
      std::vector<int> v(st.v.begin(), st.v.end());
      v[static_cast<std::size_t>(k)] = 1;
      const double h1 = oracle::bl_h(model->A, y, inst.noise_var, st.w, v, 0.6);
      v[static_cast<std::size_t>(k)] = 0;
      const double h0 = oracle::bl_h(model->A, y, inst.noise_var, st.w, v, 0.6);
      CAPTURE(k);
      CHECK(sampler.flip_log_odds(k) == doctest::Approx(h1 - h0).epsilon(1e-8));
    }
  }
}

TEST_CASE("inactive increments stay exactly zero") {
  const auto inst = build_deconvolution(30, 5, 2.0);
  auto ds_inst = inst;
  ds_inst.noise_var = 0.01;
  RngStream rng(10);
  const Vector s = generate_signal(rng, make_bernoulli_laplace(0.8, 1.0), 30).signal;
  BernoulliLaplaceGibbs sampler(std::make_shared<PosteriorModel>(ds_inst, simulate_measurements(rng, ds_inst, s)), 0.8, 1.0, rng);
  bool ok = true;
  for (int it = 0; it < 500; ++it) {
    sampler.step(rng, it);
    const auto& st = sampler.state();
    for (Eigen::Index k = 0; k < 30; ++k) {
      if (!st.v[static_cast<std::size_t>(k)] && st.u(k) != 0.0) ok = false;
      if (!(st.w(k) > 0.0)) ok = false;
    }
  }
  CHECK(ok);
  CHECK(sampler.positivity_violations() == 0);
}

TEST_CASE("nearly all-zero prior shrinks a zero measurement to zero") {
  const auto inst = build_custom(Matrix::Identity(10, 10), "identity", 1.0);
  RngStream rng(11);
  const auto r = gibbs_bernoulli_laplace(rng, inst, Vector::Zero(10), 0.999, 1.0, chain(5000, 500));
  CHECK(r.estimate.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("independent chains agree and traces show no trend") {
  auto inst = build_deconvolution(20, 5, 2.0);
  inst.noise_var = 0.02;
  RngStream data(12);
  const Vector y = simulate_measurements(data, inst, generate_signal(data, make_laplace(1.0), 20).signal);
  RngStream a(13), b(14);
  const auto ra = gibbs_laplace(a, inst, y, 1.0, chain(20000, 2000));
  const auto rb = gibbs_laplace(b, inst, y, 1.0, chain(20000, 2000));
  int outside3 = 0;
  for (Eigen::Index k = 0; k < 20; ++k) {
    const double se = std::hypot(ra.standard_error(k), rb.standard_error(k));
    const double diff = std::abs(ra.estimate(k) - rb.estimate(k));
    CHECK(diff < 5.0 * se);
    outside3 += diff > 3.0 * se;
  }
  CHECK(outside3 <= 1);
  CHECK((ra.effective_sample_size.array() > 0.0).all());

  RngStream c(15);
  const auto thinned = gibbs_laplace(c, inst, y, 1.0, chain(400, 2000, 25));
  CHECK(std::abs(oracle::mann_kendall_z(thinned.log_posterior)) < 2.576);
}

TEST_CASE("prior-only chains reproduce the increment law") {
  // No measurements: the posterior is the prior, so pooled draws must follow it.
  const auto inst = build_custom(Matrix(0, 5), "empty", 1.0);
  const Vector y(0);
  auto pooled = [](const MmseResult& r) {
    std::vector<double> xs;
    for (const auto& u : r.samples) xs.insert(xs.end(), u.data(), u.data() + u.size());
    return xs;
  };
  ChainConfig cfg = chain(4000, 100, 5);
  cfg.store_samples = true;

  RngStream r1(16);
  const auto lap = pooled(gibbs_laplace(r1, inst, y, 1.0, cfg));
  CHECK(oracle::ks_statistic(lap, [](double x) { return laplace_cdf(1.0, x); }) < oracle::ks_critical_01(lap.size()));

  RngStream r2(17);
  const auto stu = pooled(gibbs_student(r2, inst, y, 3.0, cfg));
  boost::math::students_t_distribution<> t(3.0);
  CHECK(oracle::ks_statistic(stu, [&](double x) { return boost::math::cdf(t, x * std::sqrt(3.0)); }) <
        oracle::ks_critical_01(stu.size()));

  RngStream r3(18);
  const auto bl = pooled(gibbs_bernoulli_laplace(r3, inst, y, 0.8, 1.0, cfg));
  CHECK(oracle::ks_statistic(bl, [](double x) { return 0.2 * laplace_cdf(1.0, x) + (x >= 0.0 ? 0.8 : 0.0); }) <
        oracle::ks_critical_01(bl.size()));
}

TEST_CASE("chain traces round trip through the container") {
  const auto inst = build_custom(Matrix::Identity(4, 4), "identity", 1.0);
  RngStream rng(19);
  ChainConfig cfg = chain(50, 10);
  cfg.store_samples = true;
  const auto r = gibbs_laplace(rng, inst, Vector::Ones(4), 1.0, cfg);
  const auto path = std::filesystem::temp_directory_path() / "levybench_trace.lvb";
  export_chain_trace(r, path);
  const Container c = read_container(path);
  CHECK(c.header["stored_samples"] == 50);
  CHECK(c.header["trace_length"] == 50);
  REQUIRE(c.payload.size() == 4 + 50 + 50 * 4);
  for (int k = 0; k < 4; ++k) CHECK(c.payload[static_cast<std::size_t>(k)] == r.estimate(k));
  for (int i = 0; i < 50; ++i) CHECK(c.payload[4 + static_cast<std::size_t>(i)] == r.log_posterior[static_cast<std::size_t>(i)]);
  CHECK(c.payload.back() == r.samples.back()(3));
  std::filesystem::remove(path);
}

TEST_CASE("same seed gives the same chain") {
  const auto inst = build_custom(Matrix::Identity(3, 3), "identity", 1.0);
  Vector y(3);
  y << 1, 2, 3;
  RngStream a(20), b(20);
  CHECK(gibbs_student(a, inst, y, 3.0, chain(200, 10)).estimate == gibbs_student(b, inst, y, 3.0, chain(200, 10)).estimate);
}
