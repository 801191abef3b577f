#include "bhcoreset/coreset_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "bhcoreset/errors.hpp"

namespace bhc {
namespace {

constexpr int kStallWindow = 3;

bool stalled(const std::vector<double>& trace, double tolerance) {
  if (trace.size() <= kStallWindow) return false;
  const double before = trace[trace.size() - 1 - kStallWindow];
  const double now = trace.back();
  return before - now <= tolerance * std::max(before, std::numeric_limits<double>::min());
}

}  // namespace

void SolverConfig::validate() const {
  if (M < 1) throw InputError("solver: M must be >= 1");
  if (T < 1) throw InputError("solver: T must be >= 1");
  if (!(tolerance > 0)) throw InputError("solver: tolerance must be > 0");
  if (power_iterations < 1) throw InputError("solver: power_iterations must be >= 1");
  if (max_halvings < 0) throw InputError("solver: max_halvings must be >= 0");
}

std::vector<Index> Coreset::active_set() const {
  std::vector<Index> out;
  for (Index n = 0; n < weights.size(); ++n)
    if (weights[n] > 0) out.push_back(n);
  return out;
}

// ---------------------------------------------------------------------------
// Frank-Wolfe

FrankWolfe::FrankWolfe(const GramMatrix& gram, FwVariant variant)
    : k_(gram.k), variant_(variant) {
  const Index N = gram.size();
  if (N < 1) throw InputError("frank_wolfe: empty Gram matrix");
  sigma_ = feature_norms(gram);
  scale_ = sigma_.sum();
  if (!(scale_ > 0)) throw SolverError("frank_wolfe: all-zero Gram matrix, no vertex to move to");
  k_one_ = k_.rowwise().sum();
  u_ = Vector::Zero(N);
  alpha_[-1] = 1.0;
}

Vector FrankWolfe::k_times(const Vector& v) const {
  Vector out = Vector::Zero(v.size());
  for (Index n = 0; n < v.size(); ++n)
    if (v[n] != 0.0) out.noalias() += v[n] * k_.col(n);
  return out;
}

double FrankWolfe::objective() const {
  const Vector d = u_.array() - 1.0;
  return std::max(0.0, d.dot(k_times(d)));
}

FwStep FrankWolfe::step() {
  const Index N = u_.size();
  const Vector ku = k_times(u_);
  const Vector residual = k_one_ - ku;  // <f - g_u, g_n>

  // Forward vertex: argmax (sigma / sigma_n) residual_n, zero-norm columns excluded.
  Index best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Index n = 0; n < N; ++n) {
    if (!(sigma_[n] > 0)) continue;
    const double score = scale_ / sigma_[n] * residual[n];
    if (score > best_score) {
      best_score = score;
      best = n;
    }
  }
  const double residual_dot_u = residual.dot(u_);
  const double forward_gap = best_score - residual_dot_u;

  FwStep info;
  Vector direction = -u_;
  direction[best] += scale_ / sigma_[best];
  double rho_max = 1.0;
  info.atom = best;

  if (variant_ == FwVariant::AwayStep) {
    // Away atom: the active atom least aligned with the residual.
    Index away = -1;
    double away_score = std::numeric_limits<double>::infinity();
    for (const auto& [atom, weight] : alpha_) {
      if (!(weight > 0)) continue;
      const double score = atom < 0 ? 0.0 : scale_ / sigma_[atom] * residual[atom];
      if (score < away_score) {
        away_score = score;
        away = atom;
      }
    }
    const double away_gap = residual_dot_u - away_score;
    const double away_weight = alpha_.at(away);
    if (away_gap > forward_gap && away_weight < 1.0) {
      direction = u_;
      if (away >= 0) direction[away] -= scale_ / sigma_[away];
      rho_max = away_weight / (1.0 - away_weight);
      info.away = true;
      info.atom = away;
    }
  }

  const double curvature = direction.dot(k_times(direction));
  double rho = 0.0;
  if (curvature > 0) rho = std::clamp(residual.dot(direction) / curvature, 0.0, rho_max);
  info.rho = rho;

  if (rho > 0) {
    u_ += rho * direction;
    if (!info.away) {
      for (auto& [atom, weight] : alpha_) weight *= (1.0 - rho);
      alpha_[best] += rho;
      if (rho == 1.0) {
        alpha_.clear();
        alpha_[best] = 1.0;
        u_.setZero();
        u_[best] = scale_ / sigma_[best];
      }
    } else {
      for (auto& [atom, weight] : alpha_) weight *= (1.0 + rho);
      alpha_[info.atom] -= rho;
      if (rho == rho_max) {
        alpha_.erase(info.atom);
        if (info.atom >= 0) u_[info.atom] = 0.0;
      }
    }
    std::erase_if(alpha_, [](const auto& kv) { return !(kv.second > 0); });
    u_ = u_.cwiseMax(0.0);
  }
  info.objective = objective();
  return info;
}

Coreset frank_wolfe(const GramMatrix& gram, const SolverConfig& config) {
  config.validate();
  FrankWolfe fw(gram, config.fw_variant);
  Coreset out;
  out.solver = "fw";
  out.seed = config.seed;
  out.M = config.M;
  out.stop_reason = "max-iterations";
  for (Index t = 0; t < config.T; ++t) {
    out.trace.push_back(fw.step().objective);
    if (stalled(out.trace, config.tolerance)) {
      out.stop_reason = "stalled";
      break;
    }
  }
  out.weights = fw.weights();
  return out;
}

// ---------------------------------------------------------------------------
// Iterative hard thresholding

Vector hard_threshold(const Vector& w, Index M) {
  if (M < 0) throw InputError("hard_threshold: M must be >= 0");
  Vector out = w.cwiseMax(0.0);
  const Index N = out.size();
  if (M >= N) return out;
  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return out[a] > out[b]; });
  for (std::size_t i = static_cast<std::size_t>(M); i < order.size(); ++i) out[order[i]] = 0.0;
  return out;
}

double largest_eigenvalue(const Matrix& k, int iterations) {
  const Index N = k.rows();
  Vector v(N);
  for (Index i = 0; i < N; ++i) v[i] = 1.0 + static_cast<double>(i) / static_cast<double>(N);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector kv = k * v;
    const double norm = kv.norm();
    if (!(norm > 0)) return 0.0;
    lambda = v.dot(kv);
    v = kv / norm;
  }
  return std::max(lambda, v.dot(k * v));
}

Vector iht_step(const GramMatrix& gram, const Vector& w, double step, Index M) {
  const Vector gradient = gram.k * (w.array() - 1.0).matrix();
  return hard_threshold(w - step * gradient, M);
}

Coreset iht(const GramMatrix& gram, const SolverConfig& config) {
  config.validate();
  const Index N = gram.size();
  if (config.M > N)
    throw InputError("iht: M=" + std::to_string(config.M) + " exceeds N=" + std::to_string(N));
  const double lambda = largest_eigenvalue(gram.k, config.power_iterations);
  if (!(lambda > 0)) throw SolverError("iht: all-zero Gram matrix");
  double step = 1.0 / lambda;

  Vector w = hard_threshold(uniform_subsample(N, config.M, config.seed).weights, config.M);
  double objective = mmd_sq(gram, w);
  Vector best = w;
  double best_objective = objective;

  Coreset out;
  out.solver = "iht";
  out.seed = config.seed;
  out.M = config.M;
  out.stop_reason = "max-iterations";
  for (Index t = 0; t < config.T; ++t) {
    Vector candidate = iht_step(gram, w, step, config.M);
    double candidate_objective = mmd_sq(gram, candidate);
    if (config.backtracking) {
      for (int h = 0; h < 60 && candidate_objective > objective; ++h) {
        step *= 0.5;
        candidate = iht_step(gram, w, step, config.M);
        candidate_objective = mmd_sq(gram, candidate);
      }
    }
    w = std::move(candidate);
    objective = candidate_objective;
    out.trace.push_back(objective);
    if (objective < best_objective) {
      best_objective = objective;
      best = w;
    }
    if (stalled(out.trace, config.tolerance)) {
      out.stop_reason = "stalled";
      break;
    }
  }
  out.weights = std::move(best);
  return out;
}

Coreset uniform_subsample(Index N, Index M, std::uint64_t seed) {
  if (M < 1 || M > N)
    throw InputError("uniform_subsample: need 1 <= M <= N (M=" + std::to_string(M) +
                     ", N=" + std::to_string(N) + ")");
  std::vector<Index> all(static_cast<std::size_t>(N));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(M));
  Rng rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), M, rng);

  Coreset out;
  out.weights = Vector::Zero(N);
  const double w = static_cast<double>(N) / static_cast<double>(M);
  for (Index n : chosen) out.weights[n] = w;
  out.solver = "uniform";
  out.seed = seed;
  out.M = M;
  out.stop_reason = "sampled";
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-Newton KL

QuasiNewtonStep quasi_newton_kl_step(const LikelihoodModel& model, const Dataset& data,
                                     const BaseMeasure& prior, const std::vector<Index>& subset,
                                     const Vector& subset_weights, const McmcConfig& mcmc,
                                     int max_halvings) {
  const Index M = static_cast<Index>(subset.size());
  if (subset_weights.size() != M) throw InputError("quasi_newton_kl: weight/subset length mismatch");
  const Index d = model.dim();

  const auto log_target = [&](std::span<const double> theta) {
    double lp = prior.log_density(theta);
    if (lp == -std::numeric_limits<double>::infinity()) return lp;
    for (Index m = 0; m < M; ++m)
      if (subset_weights[m] != 0.0)
        lp += subset_weights[m] * model.log_likelihood(data.point(subset[static_cast<std::size_t>(m)]), theta);
    return lp;
  };

  QuasiNewtonStep out;
  out.chain = rw_metropolis(log_target, d, mcmc);
  const ParameterSamples& samples = out.chain.samples;
  const Index S = samples.size();

  // L - L_w = sum_n (1 - w_n) log l_n with w_n = 0 off the subset; exactly
  // zero when every weight is 1.
  Vector residual_coeff = Vector::Ones(data.size());
  for (Index m = 0; m < M; ++m) residual_coeff[subset[static_cast<std::size_t>(m)]] -= subset_weights[m];

  Matrix a(S, M);
  Vector residual = Vector::Zero(S);
  for (Index s = 0; s < S; ++s) {
    const auto theta = samples.row(s);
    for (Index m = 0; m < M; ++m) a(s, m) = model.log_likelihood(data.point(subset[static_cast<std::size_t>(m)]), theta);
    for (Index n = 0; n < data.size(); ++n)
      if (residual_coeff[n] != 0.0) residual[s] += residual_coeff[n] * model.log_likelihood(data.point(n), theta);
  }
  if (!a.allFinite() || !residual.allFinite())
    throw NumericError("quasi_newton_kl: non-finite log-likelihood under the coreset posterior");

  const double inv_s = 1.0 / static_cast<double>(S);
  const Matrix ac = a.rowwise() - a.colwise().mean();
  const Vector rc = residual.array() - residual.mean();

  Matrix g = ac.transpose() * ac * inv_s;
  const Vector b = ac.transpose() * rc * inv_s;
  const double trace = g.trace();
  if (!(trace > 0) || !std::isfinite(trace))
    throw SolverError("quasi_newton_kl: covariance matrix G is zero; condition estimate inf");
  g.diagonal().array() += 1e-6 * trace / static_cast<double>(M);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  out.condition = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0) || out.condition > 1e14) {
    std::ostringstream os;
    os << "quasi_newton_kl: G is singular beyond regularization; condition estimate " << out.condition;
    throw SolverError(os.str());
  }
  const Eigen::LLT<Matrix> llt(g);
  out.direction = llt.solve(b);

  // Standard error of the direction from per-sample contributions to b,
  // scaled by the smallest per-coordinate effective sample size.
  double effective = static_cast<double>(S);
  if (out.chain.ess.ess.size() > 0) effective = std::max(1.0, out.chain.ess.ess.minCoeff());
  const Matrix contrib = ac.array().colwise() * rc.array();
  const Matrix centred = contrib.rowwise() - contrib.colwise().mean();
  const Matrix cov_b = centred.transpose() * centred * inv_s / effective;
  const Matrix g_inv = llt.solve(Matrix::Identity(M, M));
  out.std_error = (g_inv * cov_b * g_inv).diagonal().cwiseMax(0.0).cwiseSqrt();

  const auto proxy = [&](const Vector& w) {
    return (rc - ac * (w - subset_weights)).squaredNorm() * inv_s;
  };
  out.proxy_before = rc.squaredNorm() * inv_s;
  double rho = 1.0;
  out.weights = (subset_weights + rho * out.direction).cwiseMax(0.0);
  out.proxy_after = proxy(out.weights);
  while (out.proxy_after > out.proxy_before && out.halvings < max_halvings) {
    rho *= 0.5;
    ++out.halvings;
    out.weights = (subset_weights + rho * out.direction).cwiseMax(0.0);
    out.proxy_after = proxy(out.weights);
  }
  return out;
}

Coreset quasi_newton_kl(const LikelihoodModel& model, const Dataset& data, const BaseMeasure& prior,
                        const std::vector<Index>& subset, const SolverConfig& config,
                        const McmcConfig& mcmc) {
  config.validate();
  model.check(data);
  if (prior.dim() != model.dim()) throw InputError("quasi_newton_kl: prior dimension mismatch");
  const Index N = data.size();
  if (subset.empty()) throw InputError("quasi_newton_kl: empty subset");
  std::vector<Index> sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InputError("quasi_newton_kl: subset has duplicate indices");
  if (sorted.front() < 0 || sorted.back() >= N) throw InputError("quasi_newton_kl: subset index out of range");
  mcmc.validate(model.dim());

  const Index M = static_cast<Index>(subset.size());
  Vector w = Vector::Constant(M, static_cast<double>(N) / static_cast<double>(M));
  McmcConfig chain_config = mcmc;
  if (chain_config.initial.size() == 0) chain_config.initial = prior.mean();

  Coreset out;
  out.solver = "qnkl";
  out.seed = config.seed;
  out.M = M;
  out.stop_reason = "max-iterations";
  for (Index t = 0; t < config.T; ++t) {
    chain_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(t));
    QuasiNewtonStep step =
        quasi_newton_kl_step(model, data, prior, subset, w, chain_config, config.max_halvings);
    const double rate = step.chain.acceptance_rate;
    if (rate <= 0.05 || rate >= 0.95) {
      std::ostringstream os;
      os << "iteration " << t << ": MCMC acceptance rate " << rate << " outside (0.05, 0.95)";
      out.warnings.push_back(os.str());
    }
    for (const auto& msg : step.chain.warnings) out.warnings.push_back("iteration " + std::to_string(t) + ": " + msg);
    w = std::move(step.weights);
    chain_config.initial = step.chain.samples.values.row(step.chain.samples.size() - 1).transpose();
    out.trace.push_back(step.proxy_after);
    if (stalled(out.trace, config.tolerance)) {
      out.stop_reason = "stalled";
      break;
    }
  }
  out.weights = Vector::Zero(N);
  for (Index m = 0; m < M; ++m) out.weights[subset[static_cast<std::size_t>(m)]] = w[m];
  return out;
}

double coreset_posterior_logdensity(const LikelihoodModel& model, const Dataset& data,
                                    const BaseMeasure& prior, const Vector& weights,
                                    std::span<const double> theta) {
  if (weights.size() != data.size()) throw InputError("coreset_posterior_logdensity: weight length mismatch");
  return prior.log_density(theta) + model.log_likelihood_sum(data, theta, &weights);
}

}  // namespace bhc
