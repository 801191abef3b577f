#pragma once

#include <map>
#include <string>
#include <vector>

#include "bhcoreset/bhs_geometry.hpp"
#include "bhcoreset/mcmc.hpp"

namespace bhc {

enum class FwVariant {
  Plain,     // forward steps only
  AwayStep,  // forward steps plus away steps from active atoms
};

struct SolverConfig {
  Index M = 1;               // target coreset size
  Index T = 100;             // max iterations
  double tolerance = 1e-8;   // relative objective decrease over 3 iterations
  std::uint64_t seed = 0;
  FwVariant fw_variant = FwVariant::AwayStep;
  int power_iterations = 50;
  bool backtracking = true;  // IHT: halve the step when the objective rises
  int max_halvings = 10;     // quasi-Newton step damping

  void validate() const;
};

struct Coreset {
  Vector weights;  // length N, all >= 0
  std::string solver;
  std::uint64_t seed = 0;
  Index M = 0;
  std::vector<double> trace;  // objective after each iteration
  std::string stop_reason;
  std::vector<std::string> warnings;

  std::vector<Index> active_set() const;
};

/// Outcome of one Frank-Wolfe iteration. `atom` is the vertex index moved
/// towards (forward) or away from (away step); -1 denotes the origin.
struct FwStep {
  bool away = false;
  Index atom = -1;
  double rho = 0.0;
  double objective = 0.0;
};

/// Frank-Wolfe over the polytope {w >= 0, sum_n w_n sigma_n <= sigma} with
/// vertices v_n = (sigma / sigma_n) e_n, minimizing (w - 1)'K(w - 1).
/// Every quantity is computed from the Gram matrix alone: the vertex score
/// <f - g_u, g_{v_n}> is (sigma / sigma_n) (K1 - Ku)_n.
class FrankWolfe {
 public:
  // Holds a reference to `gram`, which must outlive the solver.
  FrankWolfe(const GramMatrix& gram, FwVariant variant);
  FrankWolfe(GramMatrix&&, FwVariant) = delete;

  FwStep step();

  const Vector& weights() const { return u_; }
  double objective() const;
  const Vector& sigma() const { return sigma_; }
  double polytope_scale() const { return scale_; }

 private:
  Vector k_times(const Vector& v) const;

  const Matrix& k_;
  FwVariant variant_;
  Vector sigma_;
  double scale_ = 0.0;
  Vector k_one_;
  Vector u_;
  std::map<Index, double> alpha_;  // convex weights over active atoms, -1 = origin
};

Coreset frank_wolfe(const GramMatrix& gram, const SolverConfig& config);

/// Clips negatives to zero, then zeroes all but the M largest entries.
/// Ties keep the lowest index.
Vector hard_threshold(const Vector& w, Index M);

/// Largest eigenvalue of a PSD matrix by power iteration.
double largest_eigenvalue(const Matrix& k, int iterations);

/// One projected-gradient step: hard_threshold(w - step * (Kw - K1), M).
Vector iht_step(const GramMatrix& gram, const Vector& w, double step, Index M);

Coreset iht(const GramMatrix& gram, const SolverConfig& config);

/// M distinct indices drawn uniformly without replacement, each weighted N/M.
Coreset uniform_subsample(Index N, Index M, std::uint64_t seed);

struct QuasiNewtonStep {
  Vector weights;       // updated subset weights (clipped at 0)
  Vector direction;     // G^-1 <b, nu - nu_t>
  Vector std_error;     // Monte Carlo standard error of `direction`
  double proxy_before = 0.0;
  double proxy_after = 0.0;
  int halvings = 0;
  double condition = 0.0;
  McmcResult chain;
};

/// One quasi-Newton KL update for the weights of the points in `subset`.
/// Covariances are taken under the current coreset posterior, sampled with
/// `mcmc`. The KL proxy is Var_{nu_t}(L - L_w), the squared Bayes-Hilbert
/// distance to the full posterior in B2(nu_t).
QuasiNewtonStep quasi_newton_kl_step(const LikelihoodModel& model, const Dataset& data,
                                     const BaseMeasure& prior, const std::vector<Index>& subset,
                                     const Vector& subset_weights, const McmcConfig& mcmc,
                                     int max_halvings);

Coreset quasi_newton_kl(const LikelihoodModel& model, const Dataset& data, const BaseMeasure& prior,
                        const std::vector<Index>& subset, const SolverConfig& config,
                        const McmcConfig& mcmc);

/// log pi0(theta) + sum_n w_n log l_{x_n}(theta), unnormalized.
double coreset_posterior_logdensity(const LikelihoodModel& model, const Dataset& data,
                                    const BaseMeasure& prior, const Vector& weights,
                                    std::span<const double> theta);

}  // namespace bhc
