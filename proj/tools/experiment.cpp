#include "experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <openssl/evp.h>

#include "bhcoreset/errors.hpp"
#include "bhcoreset/matrix_io.hpp"

namespace bhc::cli {

using njson = nlohmann::json;  // sorted keys: used for the canonical form

namespace {

constexpr Index kMaxGramPoints = 10000;

// ---------------------------------------------------------------------------
// strict config reader

class Node {
 public:
  Node(const njson& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError("config: '" + name() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const njson& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(raw(key), key);
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw InputError("config: missing required key '" + qualified(key) + "'");
    return as<T>(raw(key), key);
  }

  Node child(const std::string& key) { return Node(raw(key), qualified(key)); }

  Vector vector(const std::string& key) {
    const njson& v = raw(key);
    if (v.is_number()) return Vector::Constant(1, v.get<double>());
    if (!v.is_array()) throw InputError("config: '" + qualified(key) + "' must be a number array");
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Index>(i)] = as<double>(v[i], key);
    return out;
  }

  Matrix matrix(const std::string& key) {
    const njson& v = raw(key);
    if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
    if (!v.is_array() || v.empty()) throw InputError("config: '" + qualified(key) + "' must be a nested array");
    const std::size_t rows = v.size(), cols = v[0].is_array() ? v[0].size() : 0;
    Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      if (!v[r].is_array() || v[r].size() != cols)
        throw InputError("config: '" + qualified(key) + "' rows must have equal length");
      for (std::size_t c = 0; c < cols; ++c) out(static_cast<Index>(r), static_cast<Index>(c)) = as<double>(v[r][c], key);
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw InputError("config: unknown key '" + qualified(key) + "'");
  }

 private:
  template <class T>
  T as(const njson& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw InputError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw InputError("");
        if constexpr (std::is_unsigned_v<T>)
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw InputError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw InputError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw InputError("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      throw InputError("config: '" + qualified(key) + "' has the wrong type (" + v.dump() + ")");
    }
  }

  std::string name() const { return path_.empty() ? "<root>" : path_; }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const njson& j_;
  std::string path_;
  std::set<std::string> seen_;
};

MeasureSpec parse_measure(Node n, bool allow_derived) {
  MeasureSpec m;
  m.kind = n.get<std::string>("kind", allow_derived ? "prior" : "standard-gaussian");
  const std::set<std::string> kinds = allow_derived
                                          ? std::set<std::string>{"prior", "standard-gaussian", "gaussian", "laplace"}
                                          : std::set<std::string>{"standard-gaussian", "gaussian"};
  if (!kinds.count(m.kind)) throw InputError("config: unsupported measure kind '" + m.kind + "'");
  if (m.kind == "gaussian") {
    if (!n.has("mean") || !n.has("cov")) throw InputError("config: gaussian measure needs 'mean' and 'cov'");
    m.mean = n.vector("mean");
    m.cov = n.matrix("cov");
  }
  if (n.has("truncate")) {
    const Vector t = n.vector("truncate");
    if (t.size() != 2 || !(t[0] < t[1])) throw InputError("config: 'truncate' must be [lo, hi] with lo < hi");
    m.truncate = std::make_pair(t[0], t[1]);
  }
  n.finish();
  return m;
}

njson measure_json(const MeasureSpec& m) {
  njson j{{"kind", m.kind}};
  if (m.kind == "gaussian") {
    j["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
    njson cov = njson::array();
    for (Index r = 0; r < m.cov.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m.cov.cols()));
      for (Index c = 0; c < m.cov.cols(); ++c) row[static_cast<std::size_t>(c)] = m.cov(r, c);
      cov.push_back(row);
    }
    j["cov"] = cov;
  }
  j["truncate"] = m.truncate ? njson::array({m.truncate->first, m.truncate->second}) : njson(nullptr);
  return j;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::string fw_variant_name(FwVariant v) { return v == FwVariant::Plain ? "plain" : "away-step"; }

// ---------------------------------------------------------------------------
// logging and outputs

void log(const std::string& msg) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::clog << '[' << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "] " << msg << '\n';
}

std::filesystem::path out_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory '" + cfg.out + "'");
  return dir;
}

json provenance(const ExperimentConfig& cfg, const std::string& command) {
  json stages = json::object();
  for (auto [name, stage] : {std::pair{"data", Stage::Data},
                             {"base_samples", Stage::BaseSamples},
                             {"solver", Stage::Solver},
                             {"mcmc", Stage::Mcmc},
                             {"concentration", Stage::Concentration},
                             {"evaluate", Stage::Evaluate}})
    stages[name] = cfg.stage_seed(stage);
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  std::ostringstream nl;
  nl << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH;
  return json{{"command", command},
              {"config_hash", cfg.hash()},
              {"seed", cfg.seed},
              {"stage_seeds", stages},
              {"versions", {{"bhcoreset", BHC_VERSION}, {"eigen", eigen.str()}, {"nlohmann_json", nl.str()}}}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// pipeline pieces

LikelihoodModel make_model(const ExperimentConfig& cfg) {
  return cfg.model == ModelKind::GaussianMean ? LikelihoodModel::gaussian_mean(cfg.dim, cfg.obs_variance)
                                              : LikelihoodModel::logistic(cfg.dim);
}

Dataset resolve_data(const ExperimentConfig& cfg, const LikelihoodModel& model) {
  Dataset d;
  if (cfg.synthetic_n) {
    d = generate_synthetic(model, *cfg.synthetic_n, cfg.stage_seed(Stage::Data), cfg.theta_star);
  } else {
    d = load_dataset(*cfg.data_path, {cfg.model, cfg.dim, cfg.data_header});
  }
  model.check(d);
  return d;
}

BaseMeasure build_measure(const MeasureSpec& spec, Index dim, const LikelihoodModel& model,
                          const Dataset* data, const BaseMeasure* prior) {
  std::optional<BaseMeasure> m;
  if (spec.kind == "standard-gaussian") {
    m = BaseMeasure::standard_gaussian(dim);
  } else if (spec.kind == "gaussian") {
    m = BaseMeasure::gaussian(spec.mean, spec.cov);
  } else if (spec.kind == "laplace") {
    m = BaseMeasure::laplace(model, *data, *prior);
  } else {
    m = *prior;
  }
  if (m->dim() != dim) throw InputError("measure dimension does not match the model dimension");
  if (spec.truncate) m = m->truncated(spec.truncate->first, spec.truncate->second);
  return *m;
}

struct Pipeline {
  LikelihoodModel model;
  Dataset data;
  BaseMeasure prior;
  BaseMeasure base;
};

Pipeline resolve(const ExperimentConfig& cfg) {
  const auto model = make_model(cfg);
  auto data = resolve_data(cfg, model);
  const auto prior = build_measure(cfg.prior, cfg.dim, model, nullptr, nullptr);
  const auto base = build_measure(cfg.base, cfg.dim, model, &data, &prior);
  return {model, std::move(data), prior, base};
}

void check_gram_size(const Dataset& data) {
  if (data.size() > kMaxGramPoints)
    throw InputError("N=" + std::to_string(data.size()) + " exceeds the dense Gram limit of " +
                     std::to_string(kMaxGramPoints));
}

json moments_json(const McmcResult& r) {
  const auto& x = r.samples.values;
  const Vector mean = x.colwise().mean().transpose();
  const Vector var = (x.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  return json{{"mean", to_std(mean)},
              {"variance", to_std(var)},
              {"acceptance_rate", r.acceptance_rate},
              {"samples", r.samples.size()},
              {"ess", to_json(r.ess)},
              {"warnings", r.warnings}};
}

}  // namespace

// ---------------------------------------------------------------------------
// config

ExperimentConfig parse_config(const njson& j) {
  ExperimentConfig cfg;
  Node root(j, "");
  cfg.seed = root.require<std::uint64_t>("seed");

  if (root.has("model")) {
    Node m = root.child("model");
    cfg.model = parse_model_kind(m.get<std::string>("kind", "gaussian-mean"));
    cfg.dim = m.get<Index>("dim", 1);
    if (cfg.dim < 1) throw InputError("config: model.dim must be >= 1");
    if (m.has("obs_variance")) {
      if (cfg.model != ModelKind::GaussianMean) throw InputError("config: obs_variance applies to gaussian-mean only");
      cfg.obs_variance = m.get<double>("obs_variance", 1.0);
    }
    m.finish();
  }

  {
    Node d = root.child("data");
    const bool synthetic = d.has("synthetic"), file = d.has("path");
    if (synthetic == file) throw InputError("config: data needs exactly one of 'synthetic' or 'path'");
    if (synthetic) {
      Node s = d.child("synthetic");
      cfg.synthetic_n = s.require<Index>("N");
      if (*cfg.synthetic_n < 1) throw InputError("config: data.synthetic.N must be >= 1");
      if (s.has("theta_star")) cfg.theta_star = s.vector("theta_star");
      s.finish();
    } else {
      cfg.data_path = d.require<std::string>("path");
      cfg.data_header = d.get<bool>("header", false);
    }
    d.finish();
  }
  if (!cfg.theta_star && cfg.synthetic_n)
    cfg.theta_star = Vector::Constant(cfg.dim, 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
  if (cfg.theta_star && cfg.theta_star->size() != cfg.dim)
    throw InputError("config: theta_star must have model.dim entries");

  if (root.has("prior")) cfg.prior = parse_measure(root.child("prior"), false);
  if (root.has("base")) cfg.base = parse_measure(root.child("base"), true);
  cfg.samples = root.get<Index>("samples", cfg.samples);
  if (cfg.samples < 2) throw InputError("config: samples must be >= 2");

  if (root.has("solver")) {
    Node s = root.child("solver");
    cfg.solver = s.get<std::string>("name", cfg.solver);
    auto& sc = cfg.solver_config;
    sc.M = s.get<Index>("M", sc.M);
    sc.T = s.get<Index>("T", sc.T);
    sc.tolerance = s.get<double>("tolerance", sc.tolerance);
    const auto variant = s.get<std::string>("fw_variant", "away-step");
    if (variant == "plain") sc.fw_variant = FwVariant::Plain;
    else if (variant == "away-step") sc.fw_variant = FwVariant::AwayStep;
    else throw InputError("config: solver.fw_variant must be 'plain' or 'away-step'");
    sc.power_iterations = s.get<int>("power_iterations", sc.power_iterations);
    sc.backtracking = s.get<bool>("backtracking", sc.backtracking);
    sc.max_halvings = s.get<int>("max_halvings", sc.max_halvings);
    s.finish();
  }
  cfg.solver_config.validate();

  if (root.has("mcmc")) {
    Node m = root.child("mcmc");
    cfg.mcmc.length = m.get<Index>("length", cfg.mcmc.length);
    if (m.has("burn_in")) cfg.mcmc.burn_in = m.get<Index>("burn_in", 0);
    cfg.mcmc.thin = m.get<Index>("thin", cfg.mcmc.thin);
    if (m.has("proposal_sd")) {
      cfg.mcmc.proposal_sd = m.vector("proposal_sd");
      cfg.mcmc_sd_given = true;
    }
    if (m.has("initial")) cfg.mcmc.initial = m.vector("initial");
    m.finish();
  }
  if (!cfg.mcmc.burn_in) cfg.mcmc.burn_in = cfg.mcmc.burn_in_steps();
  cfg.mcmc.validate(cfg.dim);

  if (root.has("metrics")) {
    Node m = root.child("metrics");
    if (m.has("grid")) {
      Node g = m.child("grid");
      if (g.has("lo")) cfg.grid.lo = g.get<double>("lo", 0);
      if (g.has("hi")) cfg.grid.hi = g.get<double>("hi", 0);
      cfg.grid.points = g.get<Index>("points", cfg.grid.points);
      g.finish();
    }
    cfg.delta = m.get<double>("delta", cfg.delta);
    cfg.trials = m.get<Index>("trials", cfg.trials);
    if (m.has("M")) cfg.concentration_m = m.get<Index>("M", 1);
    m.finish();
  }
  cfg.out = root.get<std::string>("out", cfg.out);
  root.finish();

  static const std::set<std::string> solvers{"fw", "iht", "uniform", "qnkl"};
  if (!solvers.count(cfg.solver)) throw InputError("config: unknown solver '" + cfg.solver + "'");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  njson j;
  try {
    j = njson::parse(in);
  } catch (const njson::parse_error& e) {
    throw InputError("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j);
}

void apply(ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.solver) {
    static const std::set<std::string> solvers{"fw", "iht", "uniform", "qnkl"};
    if (!solvers.count(*o.solver)) throw InputError("unknown solver '" + *o.solver + "'");
    cfg.solver = *o.solver;
  }
  if (o.out) cfg.out = *o.out;
}

njson ExperimentConfig::canonical() const {
  njson data;
  if (synthetic_n)
    data = {{"synthetic", {{"N", *synthetic_n}, {"theta_star", to_std(*theta_star)}}}};
  else
    data = {{"path", *data_path}, {"header", data_header}};
  njson mc{{"length", mcmc.length},
           {"burn_in", mcmc.burn_in_steps()},
           {"thin", mcmc.thin},
           {"proposal_sd", mcmc_sd_given ? njson(to_std(mcmc.proposal_sd)) : njson(nullptr)},
           {"initial", mcmc.initial.size() ? njson(to_std(mcmc.initial)) : njson(nullptr)}};
  njson grid_j{{"lo", grid.lo ? njson(*grid.lo) : njson(nullptr)},
               {"hi", grid.hi ? njson(*grid.hi) : njson(nullptr)},
               {"points", grid.points}};
  const auto& sc = solver_config;
  return njson{
      {"seed", seed},
      {"model",
       {{"kind", std::string(to_string(model))},
        {"dim", dim},
        {"obs_variance", model == ModelKind::GaussianMean ? njson(obs_variance) : njson(nullptr)}}},
      {"data", data},
      {"prior", measure_json(prior)},
      {"base", measure_json(base)},
      {"samples", samples},
      {"solver",
       {{"name", solver},
        {"M", sc.M},
        {"T", sc.T},
        {"tolerance", sc.tolerance},
        {"fw_variant", fw_variant_name(sc.fw_variant)},
        {"power_iterations", sc.power_iterations},
        {"backtracking", sc.backtracking},
        {"max_halvings", sc.max_halvings}}},
      {"mcmc", mc},
      {"metrics",
       {{"grid", grid_j},
        {"delta", delta},
        {"trials", trials},
        {"M", concentration_m ? njson(*concentration_m) : njson(nullptr)}}},
  };
}

std::string ExperimentConfig::hash() const {
  const std::string text = canonical().dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

// ---------------------------------------------------------------------------
// commands

void cmd_gen_data(const ExperimentConfig& cfg) {
  if (!cfg.synthetic_n) throw InputError("gen-data needs data.synthetic in the config");
  const auto model = make_model(cfg);
  const auto data = resolve_data(cfg, model);
  const auto dir = out_dir(cfg);
  write_dataset(dir / "data.csv", data);
  json side = provenance(cfg, "gen-data");
  side["model"] = std::string(to_string(cfg.model));
  side["N"] = data.size();
  side["d"] = data.dim();
  side["theta_star"] = to_std(*cfg.theta_star);
  side["data_seed"] = cfg.stage_seed(Stage::Data);
  side["file"] = "data.csv";
  write_json(dir / "data.json", side);
  log("gen-data: wrote " + std::to_string(data.size()) + " rows to " + (dir / "data.csv").string());
}

void cmd_build(const ExperimentConfig& cfg) {
  const auto p = resolve(cfg);
  check_gram_size(p.data);
  const Index N = p.data.size();
  const auto samples = sample_base(p.base, cfg.samples, cfg.stage_seed(Stage::BaseSamples));
  const auto features = clr_features(p.model, p.data, samples);
  const auto g = gram(features);

  SolverConfig sc = cfg.solver_config;
  sc.seed = cfg.stage_seed(Stage::Solver);
  Coreset c;
  if (cfg.solver == "fw") {
    c = frank_wolfe(g, sc);
  } else if (cfg.solver == "iht") {
    c = iht(g, sc);
  } else if (cfg.solver == "uniform") {
    c = uniform_subsample(N, sc.M, sc.seed);
    c.trace = {mmd_sq(g, c.weights)};
  } else {
    if (sc.M > N) throw InputError("qnkl: M=" + std::to_string(sc.M) + " exceeds N=" + std::to_string(N));
    const auto start = uniform_subsample(N, sc.M, sc.seed);
    McmcConfig mc = cfg.mcmc;
    c = quasi_newton_kl(p.model, p.data, p.prior, start.active_set(), sc, mc);
  }
  for (std::size_t t = 0; t < c.trace.size(); ++t)
    log(cfg.solver + " iteration " + std::to_string(t + 1) + " objective " + shortest(c.trace[t]));

  const auto dir = out_dir(cfg);
  json out = provenance(cfg, "build");
  out["coreset"] = to_json(c);
  out["objective"] = mmd_sq(g, c.weights);
  out["active"] = c.active_set().size();
  out["base"] = p.base.tag();
  out["samples"] = cfg.samples;
  write_json(dir / "coreset.json", out);

  std::string csv = "iteration,objective\n";
  for (std::size_t t = 0; t < c.trace.size(); ++t) csv += std::to_string(t + 1) + "," + shortest(c.trace[t]) + "\n";
  write_text(dir / "trace.csv", csv);
  log("build: " + cfg.solver + " stopped (" + c.stop_reason + ") with objective " + shortest(mmd_sq(g, c.weights)));
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& coreset_path) {
  if (!std::filesystem::exists(coreset_path)) throw IoError("coreset file '" + coreset_path.string() + "' not found");
  const json cj = read_json(coreset_path);
  const Coreset c = coreset_from_json(cj.contains("coreset") ? cj.at("coreset") : cj);
  const auto p = resolve(cfg);
  const Index N = p.data.size(), d = cfg.dim;
  if (c.weights.size() != N)
    throw InputError("coreset has N=" + std::to_string(c.weights.size()) + " but the dataset has N=" +
                     std::to_string(N) + "; rebuild the coreset with this config");

  json out = provenance(cfg, "evaluate");
  out["coreset"] = {{"solver", c.solver}, {"M", c.M}, {"N", N}, {"active", c.active_set().size()}};

  if (d == 1) {
    const double sd = std::sqrt(p.prior.covariance()(0, 0));
    double lo = p.prior.mean()[0] - 10 * sd, hi = p.prior.mean()[0] + 10 * sd;
    if (p.prior.truncation()) std::tie(lo, hi) = *p.prior.truncation();
    if (cfg.grid.lo) lo = *cfg.grid.lo;
    if (cfg.grid.hi) hi = *cfg.grid.hi;
    const auto grid = QuadratureGrid::uniform(lo, hi, cfg.grid.points);
    const auto samples = sample_base(p.prior, cfg.samples, cfg.stage_seed(Stage::Evaluate));
    out["bounds"] = to_json(verify_bounds(p.model, p.data, c.weights, p.prior, grid, samples));
  } else {
    out["bounds"] = {{"status", "skipped"},
                     {"reason", "quadrature bounds are implemented for d = 1 only"},
                     {"hint", "use a one-dimensional model for the bound check; the moment comparison covers any d"}};
  }

  // Moment comparison by MCMC on the full and the coreset posterior.
  const auto laplace = BaseMeasure::laplace(p.model, p.data, p.prior);
  McmcConfig mc = cfg.mcmc;
  if (mc.initial.size() == 0) {
    mc.initial = laplace.mean();
    if (p.prior.truncation())
      mc.initial[0] = std::clamp(mc.initial[0], p.prior.truncation()->first, p.prior.truncation()->second);
  }
  if (!cfg.mcmc_sd_given)
    mc.proposal_sd = 2.4 / std::sqrt(static_cast<double>(d)) * laplace.covariance().diagonal().cwiseSqrt();
  const Vector ones = Vector::Ones(N);
  const auto target = [&](const Vector& w) {
    return [&, w](std::span<const double> t) { return coreset_posterior_logdensity(p.model, p.data, p.prior, w, t); };
  };
  const std::uint64_t mcmc_seed = cfg.stage_seed(Stage::Mcmc);
  mc.seed = derive_seed(mcmc_seed, 0);
  const auto full = rw_metropolis(target(ones), d, mc);
  mc.seed = derive_seed(mcmc_seed, 1);
  const auto core = rw_metropolis(target(c.weights), d, mc);

  json mom{{"full", moments_json(full)}, {"coreset", moments_json(core)}};
  const Vector m_full = full.samples.values.colwise().mean().transpose();
  const Vector m_core = core.samples.values.colwise().mean().transpose();
  const Vector v_full = (full.samples.values.rowwise() - m_full.transpose()).array().square().colwise().mean().transpose();
  const Vector v_core = (core.samples.values.rowwise() - m_core.transpose()).array().square().colwise().mean().transpose();
  mom["mean_difference"] = to_std(m_core - m_full);
  mom["variance_difference"] = to_std(v_core - v_full);
  mom["mean_difference_in_sd"] = to_std((m_core - m_full).cwiseQuotient(v_full.cwiseSqrt()));
  out["moments"] = mom;

  const auto dir = out_dir(cfg);
  write_json(dir / "evaluation.json", out);
  log("evaluate: wrote " + (dir / "evaluation.json").string());
}

void cmd_concentration(const ExperimentConfig& cfg) {
  const auto p = resolve(cfg);
  const Index M = cfg.concentration_m.value_or(cfg.solver_config.M);
  const auto samples = sample_base(p.base, cfg.samples, cfg.stage_seed(Stage::BaseSamples));
  const auto features = clr_features(p.model, p.data, samples);
  const auto r = concentration_experiment(features, M, cfg.delta, cfg.trials, cfg.stage_seed(Stage::Concentration));
  json out = provenance(cfg, "concentration");
  out["base"] = p.base.tag();
  out["samples"] = cfg.samples;
  out["report"] = to_json(r);
  const auto dir = out_dir(cfg);
  write_json(dir / "concentration.json", out);
  log("concentration: exceedance " + shortest(r.exceedance_rate) + " (allowed " + shortest(r.allowed_rate) + ")");
}

void cmd_report(const ExperimentConfig& cfg) {
  const auto p = resolve(cfg);
  check_gram_size(p.data);
  const auto samples = sample_base(p.base, cfg.samples, cfg.stage_seed(Stage::BaseSamples));
  const auto features = clr_features(p.model, p.data, samples);
  const auto g = gram(features);
  const Vector sigma = feature_norms(g);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g.k, Eigen::EigenvaluesOnly);

  const auto dir = out_dir(cfg);
  save_features(dir / "features.bin", features);
  save_gram(dir / "gram.bin", g);
  write_matrix_csv(dir / "gram.csv", g.k);

  json out = provenance(cfg, "report");
  out["base"] = p.base.tag();
  out["N"] = p.data.size();
  out["S"] = features.num_samples();
  out["gamma"] = sigma.maxCoeff();
  out["feature_norms"] = to_std(sigma);
  out["column_means"] = to_std(features.column_means);
  out["gram_trace"] = g.k.trace();
  out["gram_min_eigenvalue"] = eig.eigenvalues().minCoeff();
  out["gram_max_eigenvalue"] = eig.eigenvalues().maxCoeff();
  out["max_abs_column_mean"] = features.phi.colwise().mean().cwiseAbs().maxCoeff();
  out["files"] = {"features.bin", "gram.bin", "gram.csv"};
  write_json(dir / "report.json", out);
  log("report: N=" + std::to_string(p.data.size()) + " S=" + std::to_string(features.num_samples()));
}

}  // namespace bhc::cli
