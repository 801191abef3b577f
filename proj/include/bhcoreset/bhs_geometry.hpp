#pragma once

#include <string>

#include "bhcoreset/model_zoo.hpp"

namespace bhc {

/// Monte Carlo representation of the CLR feature map.
///
/// Column n holds log l_{x_n}(theta_s) minus its mean over the shared sample
/// grid theta_1..theta_S, i.e. the centred log-likelihood phi(x_n) evaluated
/// at every sample. Every column has empirical mean zero.
struct FeatureMatrix {
  Matrix phi;           // S x N
  Vector column_means;  // raw means m_n = (1/S) sum_s log l_{x_n}(theta_s)
  std::uint64_t seed = 0;
  std::string base_tag;

  Index num_samples() const { return phi.rows(); }
  Index num_points() const { return phi.cols(); }
};

/// Likelihood kernel k(x_n, x_m) = <phi(x_n), phi(x_m)>_{L2(mu)} on the grid.
struct GramMatrix {
  Matrix k;  // N x N, exactly symmetric
  std::uint64_t seed = 0;
  std::string base_tag;

  Index size() const { return k.rows(); }
};

FeatureMatrix clr_features(const LikelihoodModel& model, const Dataset& data,
                           const ParameterSamples& samples);

/// Centres a raw S x N log-likelihood matrix column by column.
FeatureMatrix centre_log_likelihoods(Matrix raw, std::uint64_t seed = 0, std::string base_tag = {});

GramMatrix gram(const FeatureMatrix& features);

/// Squared MMD between the weighted and the full empirical measure under the
/// likelihood kernel: w'Kw - 2 w'K1 + 1'K1, clamped at 0. Equals the squared
/// Bayes-Hilbert distance between coreset and full posterior.
double mmd_sq(const GramMatrix& gram, const Vector& w);

/// The same quantity computed in feature space:
/// (1/S) sum_s (sum_n (w_n - 1) phi[s][n])^2.
double bhs_norm_sq_via_features(const FeatureMatrix& features, const Vector& w);

/// sigma_n = ||phi(x_n)||_{L2(mu)} = sqrt(K[n][n]).
Vector feature_norms(const GramMatrix& gram);
Vector feature_norms(const FeatureMatrix& features);

}  // namespace bhc
