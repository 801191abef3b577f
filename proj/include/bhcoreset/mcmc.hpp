#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bhcoreset/model_zoo.hpp"

namespace bhc {

using LogDensity = std::function<double(std::span<const double>)>;

struct McmcConfig {
  Index length = 10000;             // total steps, burn-in included
  std::optional<Index> burn_in;     // default: 20% of length
  Index thin = 1;
  Vector proposal_sd;               // size 1 (isotropic) or d; empty -> 2.4 / sqrt(d)
  Vector initial;                   // empty -> origin
  std::uint64_t seed = 0;

  Index burn_in_steps() const { return burn_in ? *burn_in : length / 5; }
  Vector resolved_proposal_sd(Index dim) const;
  void validate(Index dim) const;
};

struct EssEstimate {
  Vector ess;                     // per dimension, in (0, chain length]
  std::vector<bool> degenerate;   // constant coordinate
};

struct McmcResult {
  ParameterSamples samples;
  double acceptance_rate = 0.0;
  EssEstimate ess;                // empty when fewer than 100 samples are kept
  std::vector<std::string> warnings;
};

/// Random-walk Metropolis with Gaussian proposals. Keeps every `thin`-th
/// state after burn-in. Deterministic per seed.
McmcResult rw_metropolis(const LogDensity& log_target, Index dim, const McmcConfig& config);

/// Effective sample size per coordinate using Geyer's initial positive
/// sequence estimator. Requires at least 100 draws.
EssEstimate ess(const ParameterSamples& chain);

}  // namespace bhc
