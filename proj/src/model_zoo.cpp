#include "bhcoreset/model_zoo.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bhcoreset/errors.hpp"

namespace bhc {
namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::GaussianMean:
      return "gaussian-mean";
    case ModelKind::Logistic:
      return "logistic-regression";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gaussian-mean") return ModelKind::GaussianMean;
  if (name == "logistic-regression" || name == "logistic") return ModelKind::Logistic;
  throw InputError("unknown model kind '" + std::string(name) + "'");
}

DataPoint Dataset::point(Index n) const {
  return {{points.row(n).data(), static_cast<std::size_t>(points.cols())},
          labels.empty() ? 0 : labels[static_cast<std::size_t>(n)]};
}

// ---------------------------------------------------------------------------
// LikelihoodModel

LikelihoodModel LikelihoodModel::gaussian_mean(Index dim, double obs_variance) {
  if (dim < 1) throw InputError("gaussian-mean: dimension must be >= 1");
  if (!(obs_variance > 0) || !std::isfinite(obs_variance))
    throw InputError("gaussian-mean: observation variance must be positive");
  return {ModelKind::GaussianMean, dim, obs_variance};
}

LikelihoodModel LikelihoodModel::logistic(Index dim) {
  if (dim < 1) throw InputError("logistic-regression: dimension must be >= 1");
  return {ModelKind::Logistic, dim, 0.0};
}

double LikelihoodModel::log_likelihood(DataPoint x, std::span<const double> theta) const {
  if (static_cast<Index>(x.x.size()) != dim_ || static_cast<Index>(theta.size()) != dim_)
    throw InputError("log_likelihood: dimension mismatch (model d=" + std::to_string(dim_) +
                     ", x has " + std::to_string(x.x.size()) + ", theta has " +
                     std::to_string(theta.size()) + ")");
  if (kind_ == ModelKind::GaussianMean) {
    double sq = 0.0;
    for (Index i = 0; i < dim_; ++i) {
      const double r = x.x[i] - theta[i];
      sq += r * r;
    }
    return -0.5 * sq / obs_variance_ -
           0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi * obs_variance_);
  }
  const double s = dot(theta, x.x);
  return x.label == 1 ? -softplus(-s) : -softplus(s);
}

double LikelihoodModel::log_likelihood_sum(const Dataset& data, std::span<const double> theta,
                                           const Vector* weights) const {
  double total = 0.0;
  for (Index n = 0; n < data.size(); ++n) {
    if (weights) {
      const double w = (*weights)[n];
      if (w != 0.0) total += w * log_likelihood(data.point(n), theta);
    } else {
      total += log_likelihood(data.point(n), theta);
    }
  }
  return total;
}

void LikelihoodModel::accumulate_derivatives(DataPoint x, std::span<const double> theta,
                                             double weight, Vector& grad, Matrix& hess) const {
  const Eigen::Map<const Vector> xv(x.x.data(), dim_);
  const Eigen::Map<const Vector> tv(theta.data(), dim_);
  if (kind_ == ModelKind::GaussianMean) {
    grad += weight * (xv - tv) / obs_variance_;
    hess.diagonal().array() -= weight / obs_variance_;
    return;
  }
  const double p = sigmoid(xv.dot(tv));
  grad += weight * (static_cast<double>(x.label) - p) * xv;
  hess -= weight * p * (1.0 - p) * (xv * xv.transpose());
}

double LikelihoodModel::log_likelihood_sup() const {
  if (kind_ == ModelKind::Logistic) return 0.0;
  return -0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi * obs_variance_);
}

void LikelihoodModel::check(const Dataset& data) const {
  if (data.size() < 1) throw InputError("empty dataset");
  if (data.dim() != dim_)
    throw InputError("dataset has d=" + std::to_string(data.dim()) + " but model expects d=" +
                     std::to_string(dim_));
  if (kind_ == ModelKind::Logistic) {
    if (static_cast<Index>(data.labels.size()) != data.size())
      throw InputError("logistic-regression needs one label per observation");
    for (std::size_t n = 0; n < data.labels.size(); ++n)
      if (data.labels[n] != 0 && data.labels[n] != 1)
        throw InputError("label of observation " + std::to_string(n) + " is not 0/1");
  }
}

// ---------------------------------------------------------------------------
// BaseMeasure

BaseMeasure::BaseMeasure(BaseKind kind, Vector mean, Matrix covariance)
    : kind_(kind), mean_(std::move(mean)), cov_(std::move(covariance)) {
  const Index d = mean_.size();
  if (d < 1) throw InputError("base measure: dimension must be >= 1");
  if (cov_.rows() != d || cov_.cols() != d)
    throw InputError("base measure: covariance must be " + std::to_string(d) + "x" +
                     std::to_string(d));
  if (!mean_.allFinite() || !cov_.allFinite())
    throw InputError("base measure: non-finite mean or covariance");
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov_.cwiseAbs().maxCoeff()))
    throw InputError("base measure: covariance is not symmetric");
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) throw InputError("base measure: covariance is not positive definite");
  chol_l_ = llt.matrixL();
  log_norm_ = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
              chol_l_.diagonal().array().log().sum();
}

BaseMeasure BaseMeasure::standard_gaussian(Index dim) {
  if (dim < 1) throw InputError("base measure: dimension must be >= 1");
  return {BaseKind::StandardGaussian, Vector::Zero(dim), Matrix::Identity(dim, dim)};
}

BaseMeasure BaseMeasure::gaussian(Vector mean, Matrix covariance) {
  return {BaseKind::Gaussian, std::move(mean), std::move(covariance)};
}

BaseMeasure BaseMeasure::laplace(const LikelihoodModel& model, const Dataset& data,
                                 const BaseMeasure& prior) {
  model.check(data);
  const Index d = model.dim();
  if (prior.dim() != d) throw InputError("laplace: prior dimension does not match model");

  const Matrix prior_precision = prior.precision();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(prior_precision, Eigen::EigenvaluesOnly);
  double curvature = eig.eigenvalues().maxCoeff();
  if (model.kind() == ModelKind::GaussianMean) {
    curvature += static_cast<double>(data.size()) / model.obs_variance();
  } else {
    curvature += 0.25 * data.points.squaredNorm();
  }
  const double step = 1.0 / curvature;

  constexpr int kIterations = 200;
  Vector theta = prior.mean();
  for (int it = 0; it < kIterations; ++it) {
    Vector grad = prior.log_density_gradient({theta.data(), static_cast<std::size_t>(d)});
    Matrix unused = Matrix::Zero(d, d);
    for (Index n = 0; n < data.size(); ++n)
      model.accumulate_derivatives(data.point(n), {theta.data(), static_cast<std::size_t>(d)}, 1.0,
                                   grad, unused);
    theta += step * grad;
  }

  Vector grad = Vector::Zero(d);
  Matrix hess = -prior_precision;
  for (Index n = 0; n < data.size(); ++n)
    model.accumulate_derivatives(data.point(n), {theta.data(), static_cast<std::size_t>(d)}, 1.0,
                                 grad, hess);
  Matrix cov = (-hess).inverse();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {BaseKind::LaplaceApproximation, std::move(theta), std::move(cov)};
}

BaseMeasure BaseMeasure::truncated(double lo, double hi) const {
  if (dim() != 1) throw InputError("truncation is only supported for d = 1");
  if (!(lo < hi)) throw InputError("truncation interval must satisfy lo < hi");
  BaseMeasure out = *this;
  const double sd = std::sqrt(cov_(0, 0));
  const double mass = standard_normal_cdf((hi - mean_[0]) / sd) - standard_normal_cdf((lo - mean_[0]) / sd);
  if (!(mass > 1e-6)) throw InputError("truncation interval carries negligible mass");
  out.truncation_ = {lo, hi};
  out.log_norm_ = log_norm_ + std::log(mass);
  return out;
}

std::string BaseMeasure::tag() const {
  std::ostringstream os;
  switch (kind_) {
    case BaseKind::StandardGaussian:
      os << "standard-gaussian";
      break;
    case BaseKind::Gaussian:
      os << "gaussian";
      break;
    case BaseKind::LaplaceApproximation:
      os << "laplace-approximation";
      break;
  }
  os << "(d=" << dim() << ")";
  if (truncation_) os << "[" << truncation_->first << "," << truncation_->second << "]";
  return os.str();
}

double BaseMeasure::log_density(std::span<const double> theta) const {
  if (static_cast<Index>(theta.size()) != dim())
    throw InputError("base measure: dimension mismatch");
  if (truncation_ && (theta[0] < truncation_->first || theta[0] > truncation_->second))
    return -std::numeric_limits<double>::infinity();
  const Eigen::Map<const Vector> t(theta.data(), dim());
  const Vector z = chol_l_.triangularView<Eigen::Lower>().solve(t - mean_);
  return -0.5 * z.squaredNorm() - log_norm_;
}

Vector BaseMeasure::log_density_gradient(std::span<const double> theta) const {
  const Eigen::Map<const Vector> t(theta.data(), dim());
  return -precision() * (t - mean_);
}

Matrix BaseMeasure::precision() const {
  const Matrix linv = chol_l_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
  return linv.transpose() * linv;
}

ParameterSamples sample_base(const BaseMeasure& base, Index count, std::uint64_t seed) {
  if (count < 2) throw InputError("sample_base: need at least 2 samples");
  const Index d = base.dim();
  ParameterSamples out{RowMatrix(count, d), base.tag(), seed};
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector z(d);
  const auto& trunc = base.truncation();
  const Index max_attempts = 1000 * count + 1000;
  Index attempts = 0;
  for (Index s = 0; s < count;) {
    for (Index i = 0; i < d; ++i) z[i] = normal(rng);
    const Vector theta = base.mean_ + base.chol_l_ * z;
    if (trunc && (theta[0] < trunc->first || theta[0] > trunc->second)) {
      if (++attempts > max_attempts) throw NumericError("sample_base: truncation rejection sampler stalled");
      continue;
    }
    out.values.row(s++) = theta.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data

Dataset generate_synthetic(const LikelihoodModel& model, Index count, std::uint64_t seed,
                           std::optional<Vector> theta_star) {
  if (count < 1) throw InputError("generate_synthetic: N must be >= 1");
  const Index d = model.dim();
  const Vector truth =
      theta_star ? *theta_star : Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  if (truth.size() != d) throw InputError("generate_synthetic: theta* has wrong dimension");

  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  Dataset out;
  out.points.resize(count, d);
  std::ostringstream tag;
  tag << "synthetic:" << to_string(model.kind()) << ":seed=" << seed;
  out.source = tag.str();

  if (model.kind() == ModelKind::GaussianMean) {
    const double sd = std::sqrt(model.obs_variance());
    for (Index n = 0; n < count; ++n)
      for (Index i = 0; i < d; ++i) out.points(n, i) = truth[i] + sd * normal(rng);
    return out;
  }
  out.labels.resize(static_cast<std::size_t>(count));
  for (Index n = 0; n < count; ++n) {
    for (Index i = 0; i < d; ++i) out.points(n, i) = normal(rng);
    const double p = sigmoid(out.points.row(n).dot(truth));
    out.labels[static_cast<std::size_t>(n)] = uniform(rng) < p ? 1 : 0;
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  const bool labelled = schema.kind == ModelKind::Logistic;
  const std::size_t expected = static_cast<std::size_t>(schema.dim) + (labelled ? 1 : 0);

  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  std::size_t row = 0;
  bool skipped_header = !schema.header;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " columns, found " +
                           std::to_string(fields.size()),
                       row);
    for (std::size_t i = 0; i < static_cast<std::size_t>(schema.dim); ++i) {
      double v = 0.0;
      const auto f = fields[i];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw ParseError("cannot parse '" + std::string(f) + "' as a number", row);
      if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(f) + "'", row);
      values.push_back(v);
    }
    if (labelled) {
      int y = -1;
      const auto f = fields.back();
      const auto res = std::from_chars(f.data(), f.data() + f.size(), y);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || (y != 0 && y != 1))
        throw ParseError("label '" + std::string(f) + "' is not 0 or 1", row);
      labels.push_back(y);
    }
  }
  if (row == 0) throw InputError("empty dataset");

  Dataset out;
  out.points = Eigen::Map<const RowMatrix>(values.data(), static_cast<Index>(row), schema.dim);
  out.labels = std::move(labels);
  out.source = path.string();
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::string text;
  for (Index n = 0; n < data.size(); ++n) {
    for (Index i = 0; i < data.dim(); ++i) {
      if (i) text += ',';
      append_number(text, data.points(n, i));
    }
    if (data.has_labels()) {
      text += ',';
      text += std::to_string(data.labels[static_cast<std::size_t>(n)]);
    }
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace bhc
