#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "entdecon/entdecon.h"

namespace {

struct Options {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  std::string out;
  std::string config_file;
  std::string mu, nu, sample, cost = "gaussian", noise = "gaussian", cls, mode = "entropic";
  double sigma2 = 1.0;
  bool emit_coupling = false;
  std::string claim = "all", seeds_file;
  bool exploratory = false;
  std::size_t n = 0;
  std::string sample_out;
};

int run_json(const nlohmann::json& config, bool to_stdout) {
  char* report = nullptr;
  int exit_code = 2;
  const ed_status s = ed_run_json(config.dump().c_str(), &report, &exit_code);
  if (s != ED_OK) {
    std::cerr << "entropic-deconv: " << ed_status_name(s) << ": " << ed_last_error() << '\n';
    return 2;
  }
  if (exit_code != 0 && *ed_last_error() != '\0') std::cerr << "entropic-deconv: " << ed_last_error() << '\n';
  if (to_stdout) std::cout << report;
  ed_string_free(report);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic optimal transport, relaxed transport and deconvolution estimators"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Options o;
  app.add_option("--seed", o.seed, "Seed (generation, k-atom starts, default certificate seeds)");
  app.add_option("--threads", o.threads, "Worker threads for certificates (default 1, reproducible)")
      ->check(CLI::Range(1, 1024));
  app.add_option("--out", o.out, "Write the report here instead of stdout");
  app.add_option("--tol", o.tol, "Solver tolerance (Sinkhorn marginal error or estimator stationarity)")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-iter", o.max_iter, "Solver iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--config", o.config_file, "Run a saved configuration (the 'config' echo of a report)")
      ->check(CLI::ExistingFile);

  auto* sinkhorn = app.add_subcommand("sinkhorn", "Entropic transport W between two measures");
  sinkhorn->add_option("--mu", o.mu, "First marginal (measure JSON)")->required();
  sinkhorn->add_option("--nu", o.nu, "Second marginal (measure JSON or sample CSV)")->required();
  sinkhorn->add_option("--cost", o.cost, "Cost spec: JSON, file, or shorthand")->capture_default_str();
  sinkhorn->add_option("--sigma2", o.sigma2, "Entropic weight")->capture_default_str()->check(CLI::PositiveNumber);
  sinkhorn->add_flag("--emit-coupling", o.emit_coupling, "Include the coupling in the report");

  auto* relaxed = app.add_subcommand("relaxed", "Relaxed transport value in closed form");
  relaxed->add_option("--p", o.mu, "Mixing measure (measure JSON)")->required();
  relaxed->add_option("--nu", o.nu, "Second marginal (measure JSON or sample CSV)")->required();
  relaxed->add_option("--cost", o.cost, "Cost spec")->capture_default_str();
  relaxed->add_option("--sigma2", o.sigma2, "Entropic weight")->capture_default_str()->check(CLI::PositiveNumber);
  relaxed->add_flag("--emit-coupling", o.emit_coupling, "Include the posterior coupling in the report");

  auto* mle = app.add_subcommand("mle", "Maximum likelihood deconvolution over a class");
  mle->add_option("--sample", o.sample, "Observations (CSV)")->required();
  mle->add_option("--class", o.cls, "Class spec: JSON, file, grid:a:b:m or k-atom:k")->required();
  mle->add_option("--noise", o.noise, "Noise spec")->capture_default_str();
  mle->add_option("--sigma2", o.sigma2, "Variance used by the 'gaussian' shorthand")->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* project = app.add_subcommand("project", "Project the empirical measure onto a class");
  project->add_option("--sample", o.sample, "Observations (CSV)")->required();
  project->add_option("--class", o.cls, "Class spec")->required();
  project->add_option("--cost", o.cost, "Cost spec")->capture_default_str();
  project->add_option("--sigma2", o.sigma2, "Entropic weight")->capture_default_str()->check(CLI::PositiveNumber);
  project->add_option("--mode", o.mode, "entropic | relaxed | hard")->capture_default_str()
      ->check(CLI::IsMember({"entropic", "relaxed", "hard"}));

  auto* certify = app.add_subcommand("certify", "Run numerical certificates; exit 0 iff all pass");
  certify->add_option("--claim", o.claim, "theorem1 | counterexample | general-noise | kmeans | lemma1 | all")->capture_default_str();
  certify->add_option("--seeds", o.seeds_file, "JSON array of seeds")->check(CLI::ExistingFile);
  certify->add_flag("--exploratory", o.exploratory, "Also record exploratory runs");

  auto* generate = app.add_subcommand("generate", "Draw Y = X + Z with X from P*");
  generate->add_option("--pstar", o.mu, "Mixing measure (measure JSON)")->required();
  generate->add_option("--noise", o.noise, "Noise spec")->capture_default_str();
  generate->add_option("--sigma2", o.sigma2, "Variance used by the 'gaussian' shorthand")->capture_default_str()
      ->check(CLI::PositiveNumber);
  generate->add_option("--n", o.n, "Sample size")->required()->check(CLI::PositiveNumber);
  generate->add_option("--sample-out", o.sample_out, "Also write the sample as CSV");

  CLI11_PARSE(app, argc, argv);

  nlohmann::json config;
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    std::stringstream text;
    text << in.rdbuf();
    try {
      config = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "entropic-deconv: " << o.config_file << ": " << e.what() << '\n';
      return 2;
    }
    if (config.is_object() && config.contains("config")) config = config["config"];
    if (!config.is_object()) {
      std::cerr << "entropic-deconv: " << o.config_file << ": expected a configuration object\n";
      return 2;
    }
  }
  if (app.get_subcommands().empty() && o.config_file.empty()) {
    std::cerr << app.help() << "entropic-deconv: a subcommand or --config is required\n";
    return 2;
  }
  const CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  if (sub != nullptr) config["command"] = sub->get_name();
  // Flags given on the command line override a loaded configuration.
  auto set_if = [&](const CLI::App* a, const char* opt, const char* key, const nlohmann::json& v) {
    if (a->count(opt) > 0 || !config.contains(key)) config[key] = v;
  };
  if (sub == sinkhorn || sub == relaxed) {
    config["mu"] = o.mu;
    config["nu"] = o.nu;
    set_if(sub, "--cost", "cost", o.cost);
    set_if(sub, "--sigma2", "sigma2", o.sigma2);
    set_if(sub, "--emit-coupling", "emit_coupling", o.emit_coupling);
  } else if (sub == mle) {
    config["sample"] = o.sample;
    config["class"] = o.cls;
    set_if(sub, "--noise", "noise", o.noise);
    set_if(sub, "--sigma2", "sigma2", o.sigma2);
  } else if (sub == project) {
    config["sample"] = o.sample;
    config["class"] = o.cls;
    set_if(sub, "--cost", "cost", o.cost);
    set_if(sub, "--sigma2", "sigma2", o.sigma2);
    set_if(sub, "--mode", "mode", o.mode);
  } else if (sub == certify) {
    set_if(sub, "--claim", "claim", o.claim);
    set_if(sub, "--seeds", "seeds_file", o.seeds_file);
    set_if(sub, "--exploratory", "exploratory", o.exploratory);
  } else if (sub == generate) {
    config["mu"] = o.mu;
    config["n"] = o.n;
    set_if(sub, "--noise", "noise", o.noise);
    set_if(sub, "--sigma2", "sigma2", o.sigma2);
    set_if(sub, "--sample-out", "sample_out", o.sample_out);
  }
  if (o.seed) config["seed"] = *o.seed;
  if (o.threads) config["threads"] = *o.threads;
  if (o.tol) config["tolerance"] = *o.tol;
  if (o.max_iter) config["max_iterations"] = *o.max_iter;
  if (!o.out.empty() || !config.contains("out")) config["out"] = o.out;
  return run_json(config, config["out"].get<std::string>().empty());
}
