#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "bhcoreset/types.hpp"

namespace bhc {

enum class ModelKind { GaussianMean, Logistic };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// One observation: a covariate vector plus, for logistic regression, a 0/1 label.
struct DataPoint {
  std::span<const double> x;
  int label = 0;
};

struct Dataset {
  RowMatrix points;         // N x d
  std::vector<int> labels;  // N entries for logistic, empty otherwise
  std::string source;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  bool has_labels() const { return !labels.empty(); }
  DataPoint point(Index n) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.points == b.points && a.labels == b.labels;
  }
};

/// Per-observation likelihood l_x(theta). Downstream code only ever sees
/// log-likelihoods, their derivatives, and an upper bound on them.
///
/// gaussian-mean: x ~ N(theta, variance * I), theta in R^d.
/// logistic:      P(y = 1 | u, theta) = 1 / (1 + exp(-<theta, u>)).
class LikelihoodModel {
 public:
  static LikelihoodModel gaussian_mean(Index dim, double obs_variance = 1.0);
  static LikelihoodModel logistic(Index dim);

  ModelKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double obs_variance() const { return obs_variance_; }

  double log_likelihood(DataPoint x, std::span<const double> theta) const;

  // Sum over the dataset with optional per-point weights (nullptr = all ones).
  double log_likelihood_sum(const Dataset& data, std::span<const double> theta,
                            const Vector* weights = nullptr) const;

  /// Accumulates weight * d/dtheta and weight * d2/dtheta2 of log l_x(theta).
  void accumulate_derivatives(DataPoint x, std::span<const double> theta, double weight,
                              Vector& grad, Matrix& hess) const;

  /// sup over (x, theta) of log l_x(theta); 0 for logistic.
  double log_likelihood_sup() const;

  // Throws InputError when the dataset does not fit the model.
  void check(const Dataset& data) const;

 private:
  LikelihoodModel(ModelKind kind, Index dim, double obs_variance)
      : kind_(kind), dim_(dim), obs_variance_(obs_variance) {}

  ModelKind kind_;
  Index dim_;
  double obs_variance_;
};

struct ParameterSamples {
  RowMatrix values;  // S x d
  std::string measure;
  std::uint64_t seed = 0;

  Index size() const { return values.rows(); }
  Index dim() const { return values.cols(); }
  std::span<const double> row(Index s) const {
    return {values.row(s).data(), static_cast<std::size_t>(values.cols())};
  }
};

enum class BaseKind { StandardGaussian, Gaussian, LaplaceApproximation };

/// A Gaussian probability measure on the parameter space, optionally
/// truncated to an interval when d = 1. Serves as prior and as base measure.
class BaseMeasure {
 public:
  static BaseMeasure standard_gaussian(Index dim);
  static BaseMeasure gaussian(Vector mean, Matrix covariance);

  /// Gaussian at the mode of prior * likelihood, with covariance the inverse
  /// negative Hessian there. The mode is found by 200 fixed-step gradient
  /// ascent iterations.
  static BaseMeasure laplace(const LikelihoodModel& model, const Dataset& data,
                             const BaseMeasure& prior);

  /// Restricts a 1-D measure to [lo, hi] and renormalizes.
  BaseMeasure truncated(double lo, double hi) const;

  BaseKind kind() const { return kind_; }
  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const std::optional<std::pair<double, double>>& truncation() const { return truncation_; }
  std::string tag() const;

  double log_density(std::span<const double> theta) const;
  Vector log_density_gradient(std::span<const double> theta) const;
  Matrix precision() const;

 private:
  BaseMeasure(BaseKind kind, Vector mean, Matrix covariance);

  friend ParameterSamples sample_base(const BaseMeasure&, Index, std::uint64_t);

  BaseKind kind_;
  Vector mean_;
  Matrix cov_;
  Matrix chol_l_;
  double log_norm_ = 0.0;  // log normalizer including any truncation mass
  std::optional<std::pair<double, double>> truncation_;
};

/// S i.i.d. draws; bit-identical for identical (base, S, seed).
ParameterSamples sample_base(const BaseMeasure& base, Index count, std::uint64_t seed);

/// Synthetic data at a ground-truth theta* (default: all-ones / sqrt(d)).
/// gaussian-mean draws x_n ~ N(theta*, variance I); logistic draws standard
/// Gaussian covariates and labels from the model at theta*.
Dataset generate_synthetic(const LikelihoodModel& model, Index count, std::uint64_t seed,
                           std::optional<Vector> theta_star = std::nullopt);

struct CsvSchema {
  ModelKind kind = ModelKind::GaussianMean;
  Index dim = 1;
  bool header = false;
};

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

}  // namespace bhc
