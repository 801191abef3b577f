#include <iostream>

#include <CLI11.hpp>

#include "bhcoreset/errors.hpp"
#include "experiment.hpp"

int main(int argc, char** argv) {
  using namespace bhc;
  CLI::App app{"Bayes-Hilbert coreset construction and evaluation", "bhcoreset"};
  app.set_version_flag("--version", BHC_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  cli::Overrides ov;
  std::string coreset_path;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", ov.out, "output directory (overrides config)");
    sub->add_option("--seed", ov.seed, "master seed (overrides config)");
    sub->add_option("--solver", ov.solver, "solver (overrides config)")
        ->check(CLI::IsMember({"fw", "iht", "uniform", "qnkl"}));
  };
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and its sidecar");
  auto* build = app.add_subcommand("build", "features, Gram and solver; writes coreset.json and trace.csv");
  auto* eval = app.add_subcommand("evaluate", "bound check and MCMC moment comparison for a coreset");
  auto* conc = app.add_subcommand("concentration", "uniform-subsample concentration experiment");
  auto* report = app.add_subcommand("report", "exports features, Gram and feature norms");
  for (auto* s : {gen, build, eval, conc, report}) add_common(s);
  eval->add_option("--coreset", coreset_path, "coreset JSON (default: <out>/coreset.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    auto cfg = cli::load_config(config_path);
    cli::apply(cfg, ov);
    if (gen->parsed()) cli::cmd_gen_data(cfg);
    if (build->parsed()) cli::cmd_build(cfg);
    if (eval->parsed())
      cli::cmd_evaluate(cfg, coreset_path.empty() ? std::filesystem::path(cfg.out) / "coreset.json"
                                                  : std::filesystem::path(coreset_path));
    if (conc->parsed()) cli::cmd_concentration(cfg);
    if (report->parsed()) cli::cmd_report(cfg);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {  // includes SolverError
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
