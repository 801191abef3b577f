#include "bhcoreset/bhs_geometry.hpp"

#include <cmath>
#include <limits>

#include "bhcoreset/errors.hpp"

namespace bhc {
namespace {

void check_weights(Index n, const Vector& w, const char* op) {
  if (w.size() != n)
    throw InputError(std::string(op) + ": weight vector has length " + std::to_string(w.size()) +
                     ", expected " + std::to_string(n));
}

}  // namespace

FeatureMatrix clr_features(const LikelihoodModel& model, const Dataset& data,
                           const ParameterSamples& samples) {
  model.check(data);
  if (samples.dim() != model.dim())
    throw InputError("clr_features: samples have d=" + std::to_string(samples.dim()) +
                     ", model expects d=" + std::to_string(model.dim()));
  if (samples.size() < 2) throw InputError("clr_features: need at least 2 samples");

  const Index S = samples.size();
  const Index N = data.size();
  Matrix raw(S, N);
  // First non-finite sample index per column, -1 if none.
  std::vector<Index> bad(static_cast<std::size_t>(N), -1);

#pragma omp parallel for schedule(static)
  for (Index n = 0; n < N; ++n) {
    const DataPoint x = data.point(n);
    for (Index s = 0; s < S; ++s) {
      const double v = model.log_likelihood(x, samples.row(s));
      raw(s, n) = v;
      if (!std::isfinite(v) && bad[static_cast<std::size_t>(n)] < 0) bad[static_cast<std::size_t>(n)] = s;
    }
  }
  for (Index n = 0; n < N; ++n)
    if (bad[static_cast<std::size_t>(n)] >= 0)
      throw NumericError("non-finite log-likelihood at data point n=" + std::to_string(n) +
                         ", sample s=" + std::to_string(bad[static_cast<std::size_t>(n)]));

  return centre_log_likelihoods(std::move(raw), samples.seed, samples.measure);
}

FeatureMatrix centre_log_likelihoods(Matrix raw, std::uint64_t seed, std::string base_tag) {
  const Index S = raw.rows();
  const Index N = raw.cols();
  if (S < 2) throw InputError("centre_log_likelihoods: need at least 2 samples");
  if (!raw.allFinite()) throw NumericError("centre_log_likelihoods: non-finite entries");

  FeatureMatrix out;
  out.column_means.resize(N);
  const double inv_s = 1.0 / static_cast<double>(S);
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < N; ++n) {
    auto col = raw.col(n);
    const double mean = pairwise_sum(col.data(), S) * inv_s;
    col.array() -= mean;
    // Second pass removes the rounding residue of the first.
    const double residue = pairwise_sum(col.data(), S) * inv_s;
    col.array() -= residue;
    out.column_means[n] = mean + residue;
  }
  out.phi = std::move(raw);
  out.seed = seed;
  out.base_tag = std::move(base_tag);
  return out;
}

GramMatrix gram(const FeatureMatrix& features) {
  const Index N = features.num_points();
  const double inv_s = 1.0 / static_cast<double>(features.num_samples());
  GramMatrix out;
  out.k = Matrix::Zero(N, N);
  out.k.selfadjointView<Eigen::Lower>().rankUpdate(features.phi.transpose(), inv_s);
  out.k.triangularView<Eigen::StrictlyUpper>() = out.k.transpose();
  out.seed = features.seed;
  out.base_tag = features.base_tag;
  return out;
}

double mmd_sq(const GramMatrix& gram, const Vector& w) {
  check_weights(gram.size(), w, "mmd_sq");
  // (w - 1)'K(w - 1) is the expanded form regrouped; exact 0 at w = 1.
  const Vector d = w.array() - 1.0;
  return std::max(0.0, d.dot(gram.k * d));
}

double bhs_norm_sq_via_features(const FeatureMatrix& features, const Vector& w) {
  check_weights(features.num_points(), w, "bhs_norm_sq_via_features");
  const Vector d = w.array() - 1.0;
  const Vector residual = features.phi * d;
  return residual.squaredNorm() / static_cast<double>(features.num_samples());
}

Vector feature_norms(const GramMatrix& gram) {
  return gram.k.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Vector feature_norms(const FeatureMatrix& features) {
  return (features.phi.colwise().squaredNorm().transpose() /
          static_cast<double>(features.num_samples()))
      .cwiseSqrt();
}

}  // namespace bhc
