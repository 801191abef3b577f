#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "bhcoreset/coreset_solvers.hpp"
#include "bhcoreset/posterior_metrics.hpp"
#include "bhcoreset/serialization.hpp"

namespace bhc::cli {

// Per-stage seeds: derive_seed(master, stage).
enum class Stage : std::uint64_t {
  Data = 1,
  BaseSamples = 2,
  Solver = 3,
  Mcmc = 4,
  Concentration = 5,
  Evaluate = 6,
};

struct MeasureSpec {
  std::string kind = "standard-gaussian";  // standard-gaussian | gaussian | laplace | prior
  Vector mean;
  Matrix cov;
  std::optional<std::pair<double, double>> truncate;
};

struct GridSpec {
  std::optional<double> lo, hi;
  Index points = 2001;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;

  ModelKind model = ModelKind::GaussianMean;
  Index dim = 1;
  double obs_variance = 1.0;

  // data: either synthetic or a CSV path
  std::optional<Index> synthetic_n;
  std::optional<Vector> theta_star;
  std::optional<std::string> data_path;
  bool data_header = false;

  MeasureSpec prior;
  MeasureSpec base{"prior", {}, {}, std::nullopt};
  Index samples = 5000;

  std::string solver = "fw";
  SolverConfig solver_config;

  McmcConfig mcmc;
  bool mcmc_sd_given = false;

  GridSpec grid;
  double delta = 0.1;
  Index trials = 1000;
  std::optional<Index> concentration_m;

  std::string out = "out";

  /// Canonical form: every field resolved, keys sorted. `out` excluded.
  nlohmann::json canonical() const;
  /// Hex SHA-256 of canonical().dump().
  std::string hash() const;

  std::uint64_t stage_seed(Stage s) const { return derive_seed(seed, static_cast<std::uint64_t>(s)); }
};

/// Parses the JSON config; unknown keys anywhere are input errors.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> solver;
  std::optional<std::string> out;
};
void apply(ExperimentConfig& cfg, const Overrides& o);

void cmd_gen_data(const ExperimentConfig& cfg);
void cmd_build(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& coreset_path);
void cmd_concentration(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);

}  // namespace bhc::cli
