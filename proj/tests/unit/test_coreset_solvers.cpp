#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bhcoreset/coreset_solvers.hpp"
#include "bhcoreset/errors.hpp"
#include "test_support.hpp"

using namespace bhc;
using bhc::testing::analytic_gaussian_gram;
using bhc::testing::points_1d;

namespace {

GramMatrix random_logistic_gram(std::uint64_t seed, Index N = 30, Index S = 400) {
  const auto model = LikelihoodModel::logistic(2);
  const auto data = generate_synthetic(model, N, seed);
  return gram(clr_features(model, data, sample_base(BaseMeasure::standard_gaussian(2), S, seed + 100)));
}

Index nnz(const Vector& w) { return (w.array() != 0.0).count(); }

}  // namespace

TEST_SUITE("coreset_solvers") {

TEST_CASE("FW recovers w = 1 on the two-point example") {
  const auto g = analytic_gaussian_gram({-1.0, 1.0});
  CHECK(g.k(0, 0) == 1.5);
  CHECK(g.k(0, 1) == -0.5);
  SolverConfig cfg;
  cfg.M = 2;
  cfg.T = 50;
  const auto c = frank_wolfe(g, cfg);
  REQUIRE(!c.trace.empty());
  CHECK(c.trace.size() <= 50);
  CHECK(c.trace.back() <= 1e-6);
  for (std::size_t t = 1; t < c.trace.size(); ++t) CHECK(c.trace[t] <= c.trace[t - 1] + 1e-15);
  CHECK(c.weights[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(c.weights[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("plain FW makes monotone progress on the two-point example") {
  const auto g = analytic_gaussian_gram({-1.0, 1.0});
  SolverConfig cfg;
  cfg.M = 2;
  cfg.T = 50;
  cfg.fw_variant = FwVariant::Plain;
  const auto c = frank_wolfe(g, cfg);
  for (std::size_t t = 1; t < c.trace.size(); ++t) CHECK(c.trace[t] <= c.trace[t - 1] + 1e-15);
  CHECK(c.trace.back() < 0.05);
}

TEST_CASE("FW with a single point lands on w = 1") {
  GramMatrix g;
  g.k = Matrix::Constant(1, 1, 2.3);
  FrankWolfe fw(g, FwVariant::AwayStep);
  const auto s = fw.step();
  CHECK(s.atom == 0);
  CHECK(s.rho == 1.0);
  CHECK(fw.weights()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.objective <= 1e-28);
}

TEST_CASE("FW first step matches a hand simulation") {
  const auto g = analytic_gaussian_gram({-0.5, 0.2, 1.5});
  const Vector k1 = g.k.rowwise().sum();
  Vector sigma(3);
  for (int n = 0; n < 3; ++n) sigma[n] = std::sqrt(g.k(n, n));
  const double scale = sigma.sum();
  Index best = 0;
  for (Index n = 1; n < 3; ++n)
    if (scale / sigma[n] * k1[n] > scale / sigma[best] * k1[best]) best = n;
  const double rho = std::clamp(k1[best] / (scale * sigma[best]), 0.0, 1.0);

  SolverConfig cfg;
  cfg.T = 1;
  const auto c = frank_wolfe(g, cfg);
  CHECK(nnz(c.weights) == 1);
  CHECK(c.weights[best] == doctest::Approx(rho * scale / sigma[best]).epsilon(1e-14));
}

TEST_CASE("FW iterates stay in the polytope with non-increasing objective") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = random_logistic_gram(seed);
    for (auto variant : {FwVariant::Plain, FwVariant::AwayStep}) {
      FrankWolfe fw(g, variant);
      double prev = fw.objective();
      Index active_bound = 0;
      for (int t = 0; t < 40; ++t) {
        const auto s = fw.step();
        const Vector& w = fw.weights();
        CHECK(w.minCoeff() >= 0.0);
        CHECK(w.dot(fw.sigma()) <= fw.polytope_scale() * (1 + 1e-12) + 1e-9);
        CHECK(s.objective <= prev * (1 + 1e-12) + 1e-15);
        if (!s.away) ++active_bound;
        CHECK(nnz(w) <= active_bound);
        prev = s.objective;
      }
    }
  }
}

TEST_CASE("FW is deterministic and rejects a zero Gram") {
  const auto g = random_logistic_gram(3);
  SolverConfig cfg;
  cfg.T = 30;
  const auto a = frank_wolfe(g, cfg), b = frank_wolfe(g, cfg);
  CHECK(a.weights == b.weights);
  CHECK(a.trace == b.trace);
  GramMatrix zero;
  zero.k = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(frank_wolfe(zero, cfg), SolverError);
}

TEST_CASE("FW agrees with feature-space herding") {
  const auto model = LikelihoodModel::logistic(2);
  const auto data = generate_synthetic(model, 12, 17);
  const auto f = clr_features(model, data, sample_base(BaseMeasure::standard_gaussian(2), 300, 18));
  const auto ref = bhc::testing::herding_reference(f, 15);
  const auto g = gram(f);
  FrankWolfe fw(g, FwVariant::AwayStep);
  for (const auto& r : ref) {
    const auto s = fw.step();
    CHECK(s.away == r.away);
    CHECK(s.atom == r.atom);
    CHECK((fw.weights() - r.weights).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("hard_threshold") {
  Vector a(3);
  a << 3, -1, 2;
  CHECK(hard_threshold(a, 1) == (Vector(3) << 3, 0, 0).finished());
  Vector b(2);
  b << -1, -2;
  CHECK(hard_threshold(b, 2) == Vector::Zero(2));
  Vector c(2);
  c << 1, 1;
  CHECK(hard_threshold(c, 1) == (Vector(2) << 1, 0).finished());
  CHECK(hard_threshold(a, 0) == Vector::Zero(3));
  CHECK_THROWS_AS(hard_threshold(a, -1), InputError);
}

TEST_CASE("IHT recovers w = 1 with M = N") {
  const auto g = analytic_gaussian_gram({-1.0, 1.0});
  SolverConfig cfg;
  cfg.M = 2;
  cfg.T = 50;
  const auto c = iht(g, cfg);
  CHECK(mmd_sq(g, c.weights) <= 1e-6);
}

TEST_CASE("IHT with M = 1 matches brute force over index and scale") {
  const std::vector<double> xs = {-1.0, 1.0};
  const auto g = analytic_gaussian_gram(xs);
  double brute = INFINITY;
  for (Index n = 0; n < 2; ++n)
    for (int i = 0; i <= 10000; ++i) {
      Vector w = Vector::Zero(2);
      w[n] = 4.0 * i / 10000.0;
      brute = std::min(brute, mmd_sq(g, w));
    }
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SolverConfig cfg;
    cfg.M = 1;
    cfg.T = 200;
    cfg.seed = seed;
    const auto c = iht(g, cfg);
    CHECK(nnz(c.weights) == 1);
    const double obj = mmd_sq(g, c.weights);
    CHECK(obj <= brute + 1e-9);
    CHECK(obj >= brute - 1e-5);
  }
}

TEST_CASE("IHT step on a diagonal kernel keeps the M largest entries") {
  GramMatrix g;
  g.k = Vector((Vector(5) << 0.3, 2.0, 0.7, 1.5, 0.1).finished()).asDiagonal();
  const Vector w = iht_step(g, Vector::Zero(5), 0.5, 2);
  CHECK(w == (Vector(5) << 0, 1.0, 0, 0.75, 0).finished());
}

TEST_CASE("IHT output is feasible and no worse than its start") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = random_logistic_gram(seed);
    for (Index M : {1, 3, 10}) {
      SolverConfig cfg;
      cfg.M = M;
      cfg.T = 100;
      cfg.seed = seed;
      const auto c = iht(g, cfg);
      CHECK(c.weights.minCoeff() >= 0.0);
      CHECK(nnz(c.weights) <= M);
      CHECK(mmd_sq(g, c.weights) <= mmd_sq(g, uniform_subsample(g.size(), M, seed).weights) + 1e-12);
    }
  }
  SolverConfig cfg;
  cfg.M = 31;
  CHECK_THROWS_AS(iht(random_logistic_gram(0), cfg), InputError);
}

TEST_CASE("largest eigenvalue by power iteration") {
  Matrix k(3, 3);
  k << 4, 1, 0, 1, 3, 0, 0, 0, 1;
  CHECK(largest_eigenvalue(k, 200) == doctest::Approx((7 + std::sqrt(5.0)) / 2).epsilon(1e-10));
}

TEST_CASE("uniform_subsample") {
  const auto all = uniform_subsample(6, 6, 1234);
  CHECK(all.weights == Vector::Ones(6));
  const auto c = uniform_subsample(10, 3, 5);
  CHECK(c.active_set().size() == 3);
  for (Index n : c.active_set()) CHECK(c.weights[n] == 10.0 / 3.0);
  CHECK(uniform_subsample(10, 3, 5).weights == c.weights);
  CHECK_THROWS_AS(uniform_subsample(3, 4, 0), InputError);
  CHECK_THROWS_AS(uniform_subsample(3, 0, 0), InputError);

  std::vector<int> hits(5, 0);
  const int runs = 10000;
  for (int s = 0; s < runs; ++s) ++hits[static_cast<std::size_t>(uniform_subsample(5, 1, derive_seed(77, s)).active_set()[0])];
  for (int h : hits) CHECK(std::abs(h / double(runs) - 0.2) <= 0.02);
}

TEST_CASE("coreset posterior log-density") {
  const auto model = LikelihoodModel::gaussian_mean(1);
  const auto data = points_1d({0.3, -1.2, 2.0, 0.9});
  const auto prior = BaseMeasure::standard_gaussian(1);
  const double t = 0.7;
  const std::span<const double> theta{&t, 1};

  CHECK(coreset_posterior_logdensity(model, data, prior, Vector::Ones(4), theta) ==
        doctest::Approx(prior.log_density(theta) + model.log_likelihood_sum(data, theta)).epsilon(1e-14));
  CHECK(coreset_posterior_logdensity(model, data, prior, Vector::Zero(4), theta) == prior.log_density(theta));

  // differences match the conjugate N(sum w x / (1 + sum w), 1 / (1 + sum w))
  Vector w(4);
  w << 0.0, 2.5, 1.0, 0.4;
  double wx = 0, ws = 0;
  for (Index n = 0; n < 4; ++n) wx += w[n] * data.points(n, 0), ws += w[n];
  const double prec = 1 + ws, mean = wx / prec;
  auto closed = [&](double x) { return -0.5 * prec * (x - mean) * (x - mean); };
  for (double a : {-2.0, 0.1, 1.3})
    for (double b : {-0.4, 0.8, 3.0}) {
      const double la = coreset_posterior_logdensity(model, data, prior, w, {&a, 1});
      const double lb = coreset_posterior_logdensity(model, data, prior, w, {&b, 1});
      CHECK(la - lb == doctest::Approx(closed(a) - closed(b)).epsilon(1e-12));
    }
  CHECK_THROWS_AS(coreset_posterior_logdensity(model, data, prior, Vector::Ones(3), theta), InputError);
}

TEST_CASE("quasi-Newton KL: fixed point at w = 1 and non-negative weights") {
  const auto model = LikelihoodModel::gaussian_mean(1);
  const auto data = generate_synthetic(model, 20, 3, Vector::Constant(1, 1.0));
  const auto prior = BaseMeasure::standard_gaussian(1);
  std::vector<Index> all(20);
  for (Index n = 0; n < 20; ++n) all[static_cast<std::size_t>(n)] = n;

  McmcConfig mc;
  mc.length = 6000;
  mc.proposal_sd = Vector::Constant(1, 0.5);
  mc.seed = 4;
  const auto step = quasi_newton_kl_step(model, data, prior, all, Vector::Ones(20), mc, 10);
  const double drift = (step.weights - Vector::Ones(20)).cwiseAbs().maxCoeff();
  CHECK(drift <= 3.0 * step.std_error.maxCoeff());
  CHECK(step.proxy_before == 0.0);

  SolverConfig cfg;
  cfg.T = 5;
  cfg.seed = 9;
  const auto c = quasi_newton_kl(model, data, prior, {2, 7, 11}, cfg, mc);
  CHECK(c.weights.minCoeff() >= 0.0);
  CHECK(nnz(c.weights) <= 3);
  const auto again = quasi_newton_kl(model, data, prior, {2, 7, 11}, cfg, mc);
  CHECK(again.weights == c.weights);
  CHECK(again.trace == c.trace);

  CHECK_THROWS_AS(quasi_newton_kl(model, data, prior, {}, cfg, mc), InputError);
  CHECK_THROWS_AS(quasi_newton_kl(model, data, prior, {1, 1}, cfg, mc), InputError);
  CHECK_THROWS_AS(quasi_newton_kl(model, data, prior, {25}, cfg, mc), InputError);
}

TEST_CASE("quasi-Newton KL moves a single point's weight towards N") {
  const auto model = LikelihoodModel::gaussian_mean(1);
  const auto data = generate_synthetic(model, 50, 8, Vector::Constant(1, 0.5));
  const auto prior = BaseMeasure::standard_gaussian(1);
  McmcConfig mc;
  mc.length = 8000;
  mc.proposal_sd = Vector::Constant(1, 0.3);
  SolverConfig cfg;
  cfg.T = 10;
  cfg.seed = 1;
  // start from weight N = 50 on one point; the optimum keeps it in the same range
  const auto c = quasi_newton_kl(model, data, prior, {0}, cfg, mc);
  CHECK(c.weights[0] > 10.0);
  CHECK(c.weights[0] < 200.0);
}

}  // TEST_SUITE
