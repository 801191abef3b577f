#include "bhcoreset/posterior_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bhcoreset/coreset_solvers.hpp"
#include "bhcoreset/errors.hpp"

namespace bhc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Normalized {
  Vector density;  // normalized p_i on the grid
  Vector log_density;
};

double trapezoid(const Vector& f, double h) {
  const Index n = f.size();
  if (n < 2) return 0.0;
  return h * (pairwise_sum(f.data(), n) - 0.5 * (f[0] + f[n - 1]));
}

Normalized normalize(const Vector& log_f, const QuadratureGrid& grid, const char* which) {
  if (log_f.size() != grid.size())
    throw InputError(std::string(which) + ": log-density has " + std::to_string(log_f.size()) +
                     " values on a grid of " + std::to_string(grid.size()));
  double top = -kInf;
  for (Index i = 0; i < log_f.size(); ++i) {
    const double v = log_f[i];
    if (std::isnan(v) || v == kInf)
      throw NumericError(std::string(which) + ": log-density not finite at grid point " +
                         std::to_string(i));
    top = std::max(top, v);
  }
  if (top == -kInf) throw NumericError(std::string(which) + ": density vanishes on the grid");

  // scalar exp: Eigen's vectorized exp clamps -inf to a tiny positive value
  Vector shifted = (log_f.array() - top).unaryExpr([](double v) { return std::exp(v); });
  const double mass = trapezoid(shifted, grid.spacing());
  if (!(mass >= 1e-12))
    throw NumericError(std::string(which) + ": quadrature mass below 1e-12");
  Normalized out;
  out.density = shifted / mass;
  out.log_density = log_f.array() - top - std::log(mass);
  return out;
}

Vector evaluate(const LogDensity1d& f, const QuadratureGrid& grid) {
  Vector v(grid.size());
  for (Index i = 0; i < grid.size(); ++i) v[i] = f(grid.points()[i]);
  return v;
}

Vector cumulative_trapezoid(const Vector& f, double h) {
  Vector c(f.size());
  double acc = 0.0;
  c[0] = 0.0;
  for (Index i = 1; i < f.size(); ++i) {
    acc += 0.5 * h * (f[i - 1] + f[i]);
    c[i] = acc;
  }
  return c;
}

double log_mean_exp(const Vector& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  Vector e = (v.array() - top).exp();
  return top + std::log(pairwise_sum(e.data(), e.size()) / static_cast<double>(v.size()));
}

}  // namespace

QuadratureGrid QuadratureGrid::uniform(double lo, double hi, Index points) {
  if (points < 100) throw InputError("quadrature grid needs at least 100 points");
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
    throw InputError("quadrature grid bounds must be finite with lo < hi");
  const double h = (hi - lo) / static_cast<double>(points - 1);
  Vector p(points);
  for (Index i = 0; i < points; ++i) p[i] = lo + h * static_cast<double>(i);
  p[points - 1] = hi;
  return QuadratureGrid(lo, hi, std::move(p), h);
}

double hellinger_1d(const Vector& log_a, const Vector& log_b, const QuadratureGrid& grid) {
  const Normalized a = normalize(log_a, grid, "hellinger_1d");
  const Normalized b = normalize(log_b, grid, "hellinger_1d");
  Vector sq = (a.density.array().sqrt() - b.density.array().sqrt()).square();
  const double h2 = 0.5 * trapezoid(sq, grid.spacing());
  return std::clamp(std::sqrt(std::max(0.0, h2)), 0.0, 1.0);
}

double kl_1d(const Vector& log_a, const Vector& log_b, const QuadratureGrid& grid) {
  const Normalized a = normalize(log_a, grid, "kl_1d");
  const Normalized b = normalize(log_b, grid, "kl_1d");
  Vector f(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const double p = a.density[i];
    if (p == 0.0) {
      f[i] = 0.0;
      continue;
    }
    if (b.density[i] == 0.0) return kInf;
    f[i] = p * (a.log_density[i] - b.log_density[i]);
  }
  return std::max(0.0, trapezoid(f, grid.spacing()));
}

double w1_1d(const Vector& log_a, const Vector& log_b, const QuadratureGrid& grid) {
  const Normalized a = normalize(log_a, grid, "w1_1d");
  const Normalized b = normalize(log_b, grid, "w1_1d");
  const Vector fa = cumulative_trapezoid(a.density, grid.spacing());
  const Vector fb = cumulative_trapezoid(b.density, grid.spacing());
  Vector diff = (fa - fb).cwiseAbs();
  return std::max(0.0, trapezoid(diff, grid.spacing()));
}

double hellinger_1d(const LogDensity1d& a, const LogDensity1d& b, const QuadratureGrid& grid) {
  return hellinger_1d(evaluate(a, grid), evaluate(b, grid), grid);
}

double kl_1d(const LogDensity1d& a, const LogDensity1d& b, const QuadratureGrid& grid) {
  return kl_1d(evaluate(a, grid), evaluate(b, grid), grid);
}

double w1_1d(const LogDensity1d& a, const LogDensity1d& b, const QuadratureGrid& grid) {
  return w1_1d(evaluate(a, grid), evaluate(b, grid), grid);
}

double bound_constant_B(const FeatureMatrix& features, const Vector& w, double C) {
  if (w.size() != features.num_points())
    throw InputError("weight vector length does not match the number of data points");
  double W = 0.0;
  for (Index n = 0; n < w.size(); ++n) {
    if (!(w[n] >= 0.0)) throw InputError("weights must be non-negative (w[" + std::to_string(n) + "])");
    W = std::max(W, w[n]);
  }
  const Vector& m = features.column_means;
  const double sum_m = pairwise_sum(m.data(), m.size());
  return -std::max(1.0, W) * sum_m + C;
}

double mu_p2_norm(const BaseMeasure& base, const QuadratureGrid& grid) {
  if (base.dim() != 1) throw InputError("mu_p2_norm: base measure must be one-dimensional");
  Vector logd(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const double t = grid.points()[i];
    logd[i] = base.log_density({&t, 1});
  }
  const Normalized p = normalize(logd, grid, "mu_p2_norm");
  const Vector& x = grid.points();
  const double mean = trapezoid(Vector(p.density.cwiseProduct(x)), grid.spacing());
  Vector centred = (x.array() - mean).square() * p.density.array();
  const double var = std::max(0.0, trapezoid(centred, grid.spacing()));
  // E[(theta - t)^2] = var + (mean - t)^2, minimized over grid points t
  double best = kInf;
  for (Index i = 0; i < grid.size(); ++i) best = std::min(best, var + (mean - x[i]) * (mean - x[i]));
  return std::sqrt(best);
}

bool within_bound(double lhs, double rhs) {
  if (std::isnan(lhs) || std::isnan(rhs)) return false;
  if (rhs == kInf) return true;
  return lhs <= rhs * (1.0 + 1e-6) + 1e-9;
}

BoundReport verify_bounds(const LikelihoodModel& model, const Dataset& data, const Vector& weights,
                          const BaseMeasure& base, const QuadratureGrid& grid,
                          const ParameterSamples& samples) {
  if (model.dim() != 1 || base.dim() != 1)
    throw InputError(
        "bound verification by quadrature supports d = 1 only; use the moment comparison for d > 1");
  model.check(data);
  const Index N = data.size();
  if (weights.size() != N) throw InputError("coreset weights do not match the dataset size");
  for (Index n = 0; n < N; ++n)
    if (!(weights[n] >= 0.0) || !std::isfinite(weights[n]))
      throw InputError("coreset weights must be finite and non-negative");
  if (samples.dim() != 1) throw InputError("parameter samples must be one-dimensional");

  const double sd = std::sqrt(base.covariance()(0, 0));
  if (!base.truncation() && grid.hi() - grid.lo() < 8.0 * sd * (1.0 - 1e-12))
    throw InputError("quadrature grid must cover at least 8 standard deviations of the base measure");
  if (base.truncation()) {
    const auto [a, b] = *base.truncation();
    if (grid.hi() - grid.lo() < std::min(8.0 * sd, b - a) * (1.0 - 1e-12))
      throw InputError("quadrature grid must cover the truncated base measure");
  }

  BoundReport r;
  r.grid_points = grid.size();
  r.grid_lo = grid.lo();
  r.grid_hi = grid.hi();
  r.samples = samples.size();

  const FeatureMatrix features = clr_features(model, data, samples);
  r.bhs_norm = std::sqrt(bhs_norm_sq_via_features(features, weights));

  // log l_x <= s for all x, theta, so with m'_n = m_n - s <= 0 both CLR
  // transforms are bounded by -max(1,W) sum m'_n.
  const double W = weights.size() ? weights.maxCoeff() : 0.0;
  r.C = std::max(1.0, W) * static_cast<double>(N) * model.log_likelihood_sup();
  r.B = bound_constant_B(features, weights, r.C);

  const Index S = features.num_samples();
  Vector psi_eta(S), psi_nu(S);
  for (Index s = 0; s < S; ++s) {
    psi_eta[s] = pairwise_sum(features.phi.row(s).data(), N, S);
    double acc = 0.0;
    for (Index n = 0; n < N; ++n) acc += weights[n] * features.phi(s, n);
    psi_nu[s] = acc;
  }
  r.log_z_eta = log_mean_exp(psi_eta);
  r.log_z_nu = log_mean_exp(psi_nu);

  const Vector ones = Vector::Ones(N);
  const double sum_m = pairwise_sum(features.column_means.data(), N);
  const double wsum_m = weights.dot(features.column_means);
  Vector log_eta(grid.size()), log_nu(grid.size());
  double clr_sup = -kInf;
  for (Index i = 0; i < grid.size(); ++i) {
    const double t = grid.points()[i];
    const std::span<const double> theta{&t, 1};
    const double prior = base.log_density(theta);
    const double l_full = model.log_likelihood_sum(data, theta, &ones);
    const double l_w = model.log_likelihood_sum(data, theta, &weights);
    log_eta[i] = prior + l_full;
    log_nu[i] = prior + l_w;
    if (std::isfinite(prior)) clr_sup = std::max({clr_sup, l_full - sum_m, l_w - wsum_m});
  }
  r.clr_sup_on_grid = clr_sup;
  r.mu_p2 = mu_p2_norm(base, grid);

  r.hellinger.lhs = hellinger_1d(log_eta, log_nu, grid);
  r.kl.lhs = kl_1d(log_eta, log_nu, grid);
  r.w1.lhs = w1_1d(log_eta, log_nu, grid);

  const double eB = std::exp(r.B);
  const double e2B = std::exp(2.0 * r.B);
  auto rhs = [&](double constant) { return r.bhs_norm == 0.0 ? 0.0 : constant * r.bhs_norm; };
  r.hellinger.rhs = rhs(0.5 * std::sqrt(eB + e2B));
  r.kl.rhs = rhs(2.0 * eB);
  r.w1.rhs = rhs((eB + e2B) * r.mu_p2);
  for (BoundCheck* c : {&r.hellinger, &r.kl, &r.w1}) c->pass = within_bound(c->lhs, c->rhs);
  return r;
}

double concentration_bound(double gamma, Index N, Index M, double delta) {
  if (N < 1 || M < 1 || M > N) throw InputError("concentration bound needs 1 <= M <= N");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("concentration bound needs 0 < delta < 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be finite and >= 0");
  const double n = static_cast<double>(N), m = static_cast<double>(M);
  return std::sqrt(8.0 * gamma * gamma * n * (n - m + 1.0) / m) * std::sqrt(2.0 * std::log(2.0 / delta));
}

ConcentrationReport concentration_experiment(const FeatureMatrix& features, Index M, double delta,
                                             Index trials, std::uint64_t seed) {
  if (trials < 100) throw InputError("concentration experiment needs at least 100 trials");
  const Index N = features.num_points();
  ConcentrationReport r;
  r.N = N;
  r.M = M;
  r.delta = delta;
  r.trials = trials;
  r.seed = seed;
  r.gamma = feature_norms(features).maxCoeff();
  r.bound = concentration_bound(r.gamma, N, M, delta);

  std::vector<double> norms(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(static)
  for (Index t = 0; t < trials; ++t) {
    const Coreset c = uniform_subsample(N, M, derive_seed(seed, static_cast<std::uint64_t>(t)));
    norms[static_cast<std::size_t>(t)] = std::sqrt(bhs_norm_sq_via_features(features, c.weights));
  }
  double sum = 0.0;
  for (double v : norms) {
    if (v > r.bound) ++r.exceedances;
    sum += v;
    r.max_norm = std::max(r.max_norm, v);
  }
  r.mean_norm = sum / static_cast<double>(trials);
  r.exceedance_rate = static_cast<double>(r.exceedances) / static_cast<double>(trials);
  r.allowed_rate = delta + 2.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
  r.pass = r.exceedance_rate <= r.allowed_rate;
  return r;
}

ConcentrationReport concentration_experiment(const LikelihoodModel& model, const Dataset& data,
                                             Index M, double delta, Index trials,
                                             const ParameterSamples& samples, std::uint64_t seed) {
  if (trials < 100) throw InputError("concentration experiment needs at least 100 trials");
  return concentration_experiment(clr_features(model, data, samples), M, delta, trials, seed);
}

}  // namespace bhc
