#include "bhcoreset/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "bhcoreset/errors.hpp"

namespace bhc {

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw InputError("expected a number, got " + j.dump());
}

json to_json(const Coreset& c) {
  json weights = json::array();
  for (Index n = 0; n < c.weights.size(); ++n)
    if (c.weights[n] != 0.0) weights.push_back(json::array({n, c.weights[n]}));
  json trace = json::array();
  for (double v : c.trace) trace.push_back(number(v));
  return json{{"solver", c.solver},         {"seed", c.seed},   {"M", c.M},
              {"N", c.weights.size()},      {"weights", weights}, {"trace", trace},
              {"stop_reason", c.stop_reason}, {"warnings", c.warnings}};
}

Coreset coreset_from_json(const json& j) {
  try {
    Coreset c;
    c.solver = j.at("solver").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.M = j.at("M").get<Index>();
    const Index N = j.at("N").get<Index>();
    if (N < 1) throw InputError("coreset N must be positive");
    c.weights = Vector::Zero(N);
    for (const auto& e : j.at("weights")) {
      if (!e.is_array() || e.size() != 2) throw InputError("coreset weights must be [index, weight] pairs");
      const Index n = e[0].get<Index>();
      const double w = e[1].get<double>();
      if (n < 0 || n >= N) throw InputError("coreset weight index " + std::to_string(n) + " out of range");
      if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("coreset weights must be finite and >= 0");
      c.weights[n] = w;
    }
    for (const auto& v : j.at("trace")) c.trace.push_back(number_from(v));
    c.stop_reason = j.value("stop_reason", "");
    c.warnings = j.value("warnings", std::vector<std::string>{});
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed coreset: ") + e.what());
  }
}

namespace {
json check_json(const BoundCheck& c) {
  return json{{"lhs", number(c.lhs)}, {"rhs", number(c.rhs)}, {"pass", c.pass}};
}
}  // namespace

json to_json(const BoundReport& r) {
  return json{{"bhs_norm", number(r.bhs_norm)},
              {"B", number(r.B)},
              {"C", number(r.C)},
              {"log_z_eta", number(r.log_z_eta)},
              {"log_z_nu", number(r.log_z_nu)},
              {"log_z_jensen_lower", 0.0},
              {"clr_sup_on_grid", number(r.clr_sup_on_grid)},
              {"mu_p2", number(r.mu_p2)},
              {"grid", {{"lo", r.grid_lo}, {"hi", r.grid_hi}, {"points", r.grid_points}}},
              {"samples", r.samples},
              {"hellinger", check_json(r.hellinger)},
              {"kl", check_json(r.kl)},
              {"w1", check_json(r.w1)},
              {"pass", r.all_pass()}};
}

json to_json(const ConcentrationReport& r) {
  return json{{"N", r.N},
              {"M", r.M},
              {"delta", r.delta},
              {"trials", r.trials},
              {"seed", r.seed},
              {"gamma", number(r.gamma)},
              {"bound", number(r.bound)},
              {"exceedances", r.exceedances},
              {"exceedance_rate", r.exceedance_rate},
              {"allowed_rate", r.allowed_rate},
              {"mean_norm", number(r.mean_norm)},
              {"max_norm", number(r.max_norm)},
              {"pass", r.pass}};
}

json to_json(const EssEstimate& e) {
  json ess = json::array();
  for (Index i = 0; i < e.ess.size(); ++i) ess.push_back(number(e.ess[i]));
  std::vector<bool> deg = e.degenerate;
  return json{{"ess", ess}, {"degenerate", deg}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace bhc
