#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bhcoreset/bhs_geometry.hpp"

namespace bhc {

/// Uniform 1-D grid for trapezoid quadrature.
class QuadratureGrid {
 public:
  static QuadratureGrid uniform(double lo, double hi, Index points);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  Index size() const { return points_.size(); }
  double spacing() const { return h_; }
  const Vector& points() const { return points_; }

 private:
  QuadratureGrid(double lo, double hi, Vector points, double h)
      : lo_(lo), hi_(hi), points_(std::move(points)), h_(h) {}

  double lo_, hi_;
  Vector points_;
  double h_;
};

using LogDensity1d = std::function<double(double)>;

// Distances between two unnormalized 1-D densities given as log-density
// values on the grid. Both are normalized by trapezoid quadrature first.
double hellinger_1d(const Vector& log_a, const Vector& log_b, const QuadratureGrid& grid);
double kl_1d(const Vector& log_a, const Vector& log_b, const QuadratureGrid& grid);
double w1_1d(const Vector& log_a, const Vector& log_b, const QuadratureGrid& grid);

double hellinger_1d(const LogDensity1d& a, const LogDensity1d& b, const QuadratureGrid& grid);
double kl_1d(const LogDensity1d& a, const LogDensity1d& b, const QuadratureGrid& grid);
double w1_1d(const LogDensity1d& a, const LogDensity1d& b, const QuadratureGrid& grid);

/// Upper bound on the CLR transforms of the full and coreset posteriors:
/// B = -max(1, max_n w_n) * sum_n m_n + C, with m_n the raw column means.
double bound_constant_B(const FeatureMatrix& features, const Vector& w, double C);

/// inf over grid points theta0 of sqrt(E_mu[(theta - theta0)^2]), with the
/// expectation taken by quadrature of the base density on the grid.
double mu_p2_norm(const BaseMeasure& base, const QuadratureGrid& grid);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct BoundReport {
  double bhs_norm = 0.0;
  double B = 0.0;
  double C = 0.0;
  double log_z_eta = 0.0;  // full posterior, Monte Carlo; Jensen gives log Z >= 0
  double log_z_nu = 0.0;   // coreset posterior
  double clr_sup_on_grid = 0.0;
  double mu_p2 = 0.0;
  Index grid_points = 0;
  double grid_lo = 0.0, grid_hi = 0.0;
  Index samples = 0;
  BoundCheck hellinger, kl, w1;

  bool all_pass() const { return hellinger.pass && kl.pass && w1.pass; }
};

/// pass <=> lhs <= rhs * (1 + 1e-6) + 1e-9.
bool within_bound(double lhs, double rhs);

/// Distance bounds between the full posterior (eta) and the coreset
/// posterior (nu) for a 1-D model whose prior is the base measure mu.
/// Left-hand sides by quadrature on `grid`; right-hand sides from the
/// Bayes-Hilbert norm and B estimated on `samples` drawn from `base`.
BoundReport verify_bounds(const LikelihoodModel& model, const Dataset& data, const Vector& weights,
                          const BaseMeasure& base, const QuadratureGrid& grid,
                          const ParameterSamples& samples);

/// sqrt(8 gamma^2 N (N - M + 1) / M) * sqrt(2 log(2 / delta)).
double concentration_bound(double gamma, Index N, Index M, double delta);

struct ConcentrationReport {
  double gamma = 0.0;
  double bound = 0.0;
  Index N = 0, M = 0, trials = 0;
  double delta = 0.0;
  Index exceedances = 0;
  double exceedance_rate = 0.0;
  double allowed_rate = 0.0;  // delta + 2 sqrt(delta (1 - delta) / trials)
  double mean_norm = 0.0;
  double max_norm = 0.0;
  std::uint64_t seed = 0;
  bool pass = false;
};

/// Repeated uniform subsampling; trial t uses seed derive_seed(seed, t).
ConcentrationReport concentration_experiment(const FeatureMatrix& features, Index M, double delta,
                                             Index trials, std::uint64_t seed);

ConcentrationReport concentration_experiment(const LikelihoodModel& model, const Dataset& data,
                                             Index M, double delta, Index trials,
                                             const ParameterSamples& samples, std::uint64_t seed);

}  // namespace bhc
