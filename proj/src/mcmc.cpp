#include "bhcoreset/mcmc.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bhcoreset/errors.hpp"

namespace bhc {

Vector McmcConfig::resolved_proposal_sd(Index dim) const {
  if (proposal_sd.size() == 0) return Vector::Constant(dim, 2.4 / std::sqrt(static_cast<double>(dim)));
  if (proposal_sd.size() == 1) return Vector::Constant(dim, proposal_sd[0]);
  return proposal_sd;
}

void McmcConfig::validate(Index dim) const {
  if (dim < 1) throw InputError("mcmc: dimension must be >= 1");
  if (length < 1) throw InputError("mcmc: chain length must be positive");
  const Index b = burn_in_steps();
  if (b < 0 || b >= length) throw InputError("mcmc: need chain length > burn-in >= 0");
  if (thin < 1) throw InputError("mcmc: thinning must be >= 1");
  if (proposal_sd.size() != 0 && proposal_sd.size() != 1 && proposal_sd.size() != dim)
    throw InputError("mcmc: proposal sd must be a scalar or have one entry per dimension");
  if (proposal_sd.size() != 0 && !(proposal_sd.array() > 0).all())
    throw InputError("mcmc: proposal sd must be positive");
  if (initial.size() != 0 && initial.size() != dim)
    throw InputError("mcmc: initial point has wrong dimension");
  if ((length - b + thin - 1) / thin < 2) throw InputError("mcmc: fewer than 2 samples would be kept");
}

McmcResult rw_metropolis(const LogDensity& log_target, Index dim, const McmcConfig& config) {
  config.validate(dim);
  const Vector sd = config.resolved_proposal_sd(dim);
  Vector current = config.initial.size() ? config.initial : Vector::Zero(dim);
  const auto view = [dim](const Vector& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(dim));
  };
  double current_lp = log_target(view(current));
  if (std::isnan(current_lp) || current_lp == -std::numeric_limits<double>::infinity())
    throw InputError("mcmc: log target is not finite at the initial point");

  const Index burn = config.burn_in_steps();
  const Index kept = (config.length - burn + config.thin - 1) / config.thin;
  McmcResult result;
  result.samples.values.resize(kept, dim);
  result.samples.measure = "rw-metropolis";
  result.samples.seed = config.seed;

  Rng rng(config.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  Vector proposal(dim);
  Index accepted = 0;
  Index row = 0;
  for (Index step = 0; step < config.length; ++step) {
    for (Index i = 0; i < dim; ++i) proposal[i] = current[i] + sd[i] * normal(rng);
    const double proposal_lp = log_target(view(proposal));
    const double log_u = std::log(uniform(rng));
    if (!std::isnan(proposal_lp) && log_u < proposal_lp - current_lp) {
      current.swap(proposal);
      current_lp = proposal_lp;
      ++accepted;
    }
    if (step >= burn && (step - burn) % config.thin == 0) result.samples.values.row(row++) = current.transpose();
  }
  result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.length);
  if (result.acceptance_rate < 0.01) {
    std::ostringstream os;
    os << "acceptance rate " << result.acceptance_rate << " is below 0.01; reduce the proposal sd";
    result.warnings.push_back(os.str());
  }
  if (kept >= 100) result.ess = ess(result.samples);
  return result;
}

EssEstimate ess(const ParameterSamples& chain) {
  const Index n = chain.size();
  if (n < 100) throw InputError("ess: need a chain of at least 100 draws");
  EssEstimate out;
  out.ess.resize(chain.dim());
  out.degenerate.assign(static_cast<std::size_t>(chain.dim()), false);
  for (Index j = 0; j < chain.dim(); ++j) {
    const Vector x = chain.values.col(j);
    const Vector c = x.array() - x.mean();
    const double gamma0 = c.squaredNorm() / static_cast<double>(n);
    if (!(gamma0 > 0)) {
      out.ess[j] = 1.0;
      out.degenerate[static_cast<std::size_t>(j)] = true;
      continue;
    }
    const auto autocorr = [&](Index lag) {
      if (lag >= n) return 0.0;
      return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n) / gamma0;
    };
    // tau = -1 + 2 * sum of consecutive pair sums while they stay positive.
    double tau = -1.0;
    for (Index k = 0; 2 * k + 1 < n; ++k) {
      const double pair = autocorr(2 * k) + autocorr(2 * k + 1);
      if (pair <= 0) break;
      tau += 2.0 * pair;
    }
    out.ess[j] = std::min(static_cast<double>(n), static_cast<double>(n) / std::max(tau, 1e-12));
  }
  return out;
}

}  // namespace bhc
