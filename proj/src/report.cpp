#include "entdecon/report.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "entdecon/costs.hpp"
#include "entdecon/deconvolution.hpp"
#include "entdecon/error.hpp"
#include "entdecon/generate.hpp"
#include "entdecon/measures.hpp"
#include "entdecon/relaxed.hpp"
#include "entdecon/sinkhorn.hpp"
#include "entdecon/verification.hpp"

namespace entdecon {

using json = nlohmann::json;

namespace {

constexpr std::pair<Command, const char*> kCommandNames[] = {
    {Command::Sinkhorn, "sinkhorn"}, {Command::Relaxed, "relaxed"},   {Command::Mle, "mle"},
    {Command::Project, "project"},   {Command::Certify, "certify"},   {Command::Generate, "generate"},
};

void log(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[entdecon] " << msg << '\n';
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, origin + ": " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

double parse_number(const std::string& s, const std::string& origin) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::Parse, origin + ": '" + s + "' is not a number");
  return v;
}

struct Spec {
  json value;
  std::string base_dir;
};

// Inline JSON, shorthand, or the name of a JSON file.
Spec resolve_spec(const json& v, const std::string& what, double sigma2) {
  if (v.is_null()) throw Error(ErrorCode::InvalidArgument, what + " spec is required");
  if (!v.is_string()) return {v, ""};
  const auto text = v.get<std::string>();
  if (!text.empty() && text.front() == '{') return {parse_json(text, what + " spec"), ""};
  const auto parts = split(text, ':');
  const std::string& head = parts.empty() ? text : parts.front();
  if (parts.size() == 1 && head == "gaussian") return {{{"kind", "gaussian"}, {"sigma2", sigma2}}, ""};
  if (parts.size() == 1 && (head == "laplace" || head == "wfr-cosine")) return {{{"kind", head}}, ""};
  if (parts.size() == 2 && head == "p-exponential") {
    return {{{"kind", "p-exponential"}, {"p", parse_number(parts[1], what + " spec")}}, ""};
  }
  if (parts.size() == 2 && head == "k-atom") {
    const double k = parse_number(parts[1], what + " spec");
    if (k < 1 || k != static_cast<double>(static_cast<long long>(k))) {
      throw Error(ErrorCode::Parse, what + " spec: k must be a positive integer");
    }
    return {{{"kind", "k-atom"}, {"k", static_cast<long long>(k)}}, ""};
  }
  if (parts.size() == 4 && head == "grid") {
    const double a = parse_number(parts[1], what + " spec");
    const double b = parse_number(parts[2], what + " spec");
    const double m = parse_number(parts[3], what + " spec");
    if (m < 1 || m != static_cast<double>(static_cast<long long>(m)) || (m == 1 && a != b) || b < a) {
      throw Error(ErrorCode::Parse, what + " spec: grid:a:b:m needs a <= b and a positive integer m");
    }
    json atoms = json::array();
    const auto count = static_cast<std::size_t>(m);
    for (std::size_t i = 0; i < count; ++i) {
      atoms.push_back(count == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return {{{"kind", "grid"}, {"atoms", atoms}}, ""};
  }
  const auto parent = std::filesystem::path(text).parent_path().string();
  return {parse_json(read_text(text), text), parent};
}

bool is_csv(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".csv" || ext == ".CSV";
}

DiscreteMeasure load_second_marginal(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "second marginal (nu) is required");
  return is_csv(path) ? empirical_measure(load_sample(path)) : load_measure(path);
}

const std::string& required_path(const std::string& path, const char* what) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is required");
  return path;
}

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  if (c.tolerance) s.tolerance = *c.tolerance;
  if (c.max_iterations) s.max_iterations = *c.max_iterations;
  s.validate();
  return s;
}

EstimatorConfig estimator_config(const RunConfig& c) {
  EstimatorConfig e;
  if (c.tolerance) {
    if (!(*c.tolerance > 0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
    e.stationarity_tolerance = *c.tolerance;
  }
  if (c.max_iterations) e.max_iterations = *c.max_iterations;
  e.seed = c.seed;
  return e;
}

struct Payload {
  json value;
  int exit_code = kExitOk;
};

Payload run_sinkhorn(const RunConfig& c) {
  const auto mu = load_measure(required_path(c.mu, "first marginal (mu)"));
  const auto nu = load_second_marginal(c.nu);
  const auto cost = cost_from_json(resolve_spec(c.cost, "cost", c.sigma2).value, mu.dim());
  const auto sol = sinkhorn(mu, nu, cost, c.sigma2, solver_config(c));
  json p = to_json(sol, c.emit_coupling);
  p["cost"] = cost_name(cost);
  p["sigma2"] = c.sigma2;
  return {p, kExitOk};
}

Payload run_relaxed(const RunConfig& c) {
  const auto pm = load_measure(required_path(c.mu, "mixing measure (mu)"));
  const auto nu = load_second_marginal(c.nu);
  const auto cost = cost_from_json(resolve_spec(c.cost, "cost", c.sigma2).value, pm.dim());
  const auto sol = relaxed_transport(pm, nu, cost, c.sigma2);
  json p = to_json(sol);
  if (c.emit_coupling) p["posterior_rows"] = to_json(sol.posterior_rows);
  p["cost"] = cost_name(cost);
  p["sigma2"] = c.sigma2;
  return {p, kExitOk};
}

MixtureClass load_class(const RunConfig& c, std::size_t dim) {
  const auto spec = resolve_spec(c.mixture_class, "class", c.sigma2);
  return mixture_class_from_json(spec.value, dim, spec.base_dir);
}

Payload estimator_payload(const EstimatorResult& r, const MixtureClass& cls) {
  json p = to_json(r);
  p["class"] = cls.name();
  return {p, r.converged ? kExitOk : kExitNotConverged};
}

Payload run_mle(const RunConfig& c) {
  const auto sample = load_sample(required_path(c.sample, "sample"));
  const auto noise = noise_from_json(resolve_spec(c.noise, "noise", c.sigma2).value, sample.dim());
  const auto cls = load_class(c, sample.dim());
  const auto r = mle(sample, cls, noise, estimator_config(c));
  Payload out = estimator_payload(r, cls);
  out.value["noise"] = to_json(noise);
  out.value["log_likelihood"] = log_likelihood(r.estimate, sample, noise).value;
  return out;
}

Payload run_project(const RunConfig& c) {
  const auto sample = load_sample(required_path(c.sample, "sample"));
  const auto nu = empirical_measure(sample);
  const auto cfg = estimator_config(c);
  if (c.mode == "hard") {
    const auto cls = load_class(c, sample.dim());
    const auto* k = std::get_if<KAtomClass>(&cls.kind());
    if (k == nullptr) throw Error(ErrorCode::InvalidArgument, "project --mode hard needs a k-atom class");
    return estimator_payload(project_hard_kmeans(nu, k->k, cfg), cls);
  }
  const auto cost = cost_from_json(resolve_spec(c.cost, "cost", c.sigma2).value, sample.dim());
  const auto cls = load_class(c, sample.dim());
  Payload out;
  if (c.mode == "entropic") {
    out = estimator_payload(project_entropic(cls, nu, cost, c.sigma2, cfg), cls);
  } else if (c.mode == "relaxed") {
    out = estimator_payload(project_relaxed(cls, nu, cost, c.sigma2, cfg), cls);
  } else {
    throw Error(ErrorCode::InvalidArgument, "project: unknown mode '" + c.mode + "' (entropic|relaxed|hard)");
  }
  out.value["cost"] = cost_name(cost);
  out.value["sigma2"] = c.sigma2;
  return out;
}

std::vector<std::uint64_t> load_seeds(const std::string& path) {
  if (path.empty()) return {};
  const json j = parse_json(read_text(path), path);
  const json& list = j.is_object() && j.contains("seeds") ? j["seeds"] : j;
  if (!list.is_array() || list.empty()) throw Error(ErrorCode::Parse, path + ": expected a non-empty array of seeds");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!list[i].is_number_unsigned()) {
      throw Error(ErrorCode::Parse, path + ": seed " + std::to_string(i) + " is not a non-negative integer");
    }
    seeds.push_back(list[i].get<std::uint64_t>());
  }
  return seeds;
}

Payload run_certify(const RunConfig& c) {
  const auto seeds = load_seeds(c.seeds_file);
  const auto reports = certify_claim(c.claim, seeds, c.exploratory, c.threads, c.seed);
  json arr = json::array();
  bool pass = true;
  for (const auto& r : reports) {
    log(1, "certify " + r.claim_id + ": " + (r.pass ? "PASS" : "FAIL"));
    pass = pass && r.pass;
    arr.push_back(to_json(r));
  }
  return {arr, pass ? kExitOk : kExitCertificateFailed};
}

Payload run_generate(const RunConfig& c) {
  const auto pstar = load_measure(required_path(c.mu, "mixing measure (mu)"));
  if (c.n == 0) throw Error(ErrorCode::InvalidArgument, "generate: n must be at least 1");
  const auto noise = noise_from_json(resolve_spec(c.noise, "noise", c.sigma2).value, pstar.dim());
  const auto sample = generate_sample(pstar, noise, c.n, c.seed);
  if (!c.sample_out.empty()) {
    std::ofstream out(c.sample_out, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + c.sample_out + "'");
    out << sample_to_csv(sample);
  }
  json p;
  p["n"] = c.n;
  p["noise"] = to_json(noise);
  p["points"] = sample.points();
  return {p, kExitOk};
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Infeasible: return kExitInfeasible;
    case ErrorCode::NotConverged: return kExitNotConverged;
    case ErrorCode::Io: return kExitIo;
    default: return kExitUsage;
  }
}

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::NotConverged: return "not-converged";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cmd, name] : kCommandNames) {
    if (cmd == c) return name;
  }
  return "unknown";
}

Command command_from_string(const std::string& name) {
  for (const auto& [cmd, n] : kCommandNames) {
    if (name == n) return cmd;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + name + "'");
}

json to_json(const RunConfig& c) {
  json j;
  j["command"] = to_string(c.command);
  j["mu"] = c.mu;
  j["nu"] = c.nu;
  j["sample"] = c.sample;
  j["cost"] = c.cost;
  j["noise"] = c.noise;
  j["class"] = c.mixture_class;
  j["mode"] = c.mode;
  j["sigma2"] = c.sigma2;
  j["tolerance"] = c.tolerance ? json(*c.tolerance) : json(nullptr);
  j["max_iterations"] = c.max_iterations ? json(*c.max_iterations) : json(nullptr);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  j["emit_coupling"] = c.emit_coupling;
  j["claim"] = c.claim;
  j["seeds_file"] = c.seeds_file;
  j["exploratory"] = c.exploratory;
  j["n"] = c.n;
  j["sample_out"] = c.sample_out;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "config: expected a JSON object");
  RunConfig c;
  auto field_error = [](const std::string& key, const char* expected) {
    return Error(ErrorCode::Parse, "config: field '" + key + "' must be " + expected);
  };
  auto str = [&](const std::string& key, const json& v) {
    if (!v.is_string()) throw field_error(key, "a string");
    return v.get<std::string>();
  };
  auto uint = [&](const std::string& key, const json& v) {
    if (!v.is_number_unsigned()) throw field_error(key, "a non-negative integer");
    return v.get<std::uint64_t>();
  };
  auto num = [&](const std::string& key, const json& v) {
    if (!v.is_number()) throw field_error(key, "a number");
    return v.get<double>();
  };
  auto flag = [&](const std::string& key, const json& v) {
    if (!v.is_boolean()) throw field_error(key, "a boolean");
    return v.get<bool>();
  };
  auto spec = [&](const std::string& key, const json& v) {
    if (!v.is_null() && !v.is_string() && !v.is_object()) throw field_error(key, "a string or an object");
    return v;
  };
  if (!j.contains("command")) throw Error(ErrorCode::Parse, "config: missing field 'command'");
  for (const auto& [key, v] : j.items()) {
    if (key == "command") {
      c.command = command_from_string(str(key, v));
    } else if (key == "mu") {
      c.mu = str(key, v);
    } else if (key == "nu") {
      c.nu = str(key, v);
    } else if (key == "sample") {
      c.sample = str(key, v);
    } else if (key == "cost") {
      c.cost = spec(key, v);
    } else if (key == "noise") {
      c.noise = spec(key, v);
    } else if (key == "class") {
      c.mixture_class = spec(key, v);
    } else if (key == "mode") {
      c.mode = str(key, v);
    } else if (key == "sigma2") {
      c.sigma2 = num(key, v);
    } else if (key == "tolerance") {
      if (!v.is_null()) c.tolerance = num(key, v);
    } else if (key == "max_iterations") {
      if (!v.is_null()) c.max_iterations = uint(key, v);
    } else if (key == "seed") {
      c.seed = uint(key, v);
    } else if (key == "threads") {
      const auto t = uint(key, v);
      if (t == 0 || t > 1024) throw field_error(key, "between 1 and 1024");
      c.threads = static_cast<unsigned>(t);
    } else if (key == "out") {
      c.out = str(key, v);
    } else if (key == "emit_coupling") {
      c.emit_coupling = flag(key, v);
    } else if (key == "claim") {
      c.claim = str(key, v);
    } else if (key == "seeds_file") {
      c.seeds_file = str(key, v);
    } else if (key == "exploratory") {
      c.exploratory = flag(key, v);
    } else if (key == "n") {
      c.n = uint(key, v);
    } else if (key == "sample_out") {
      c.sample_out = str(key, v);
    } else {
      throw Error(ErrorCode::Parse, "config: unknown field '" + key + "'");
    }
  }
  return c;
}

int log_level() {
  const char* v = std::getenv("ENTROPIC_DECONV_LOG");
  if (v == nullptr) return 0;
  const std::string s(v);
  if (s == "debug" || s == "2") return 2;
  if (s == "info" || s == "1") return 1;
  return 0;
}

std::string render_report(const json& report) { return report.dump(2) + '\n'; }

RunResult run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  Payload payload;
  log(2, "config " + to_json(config).dump());
  try {
    switch (config.command) {
      case Command::Sinkhorn: payload = run_sinkhorn(config); break;
      case Command::Relaxed: payload = run_relaxed(config); break;
      case Command::Mle: payload = run_mle(config); break;
      case Command::Project: payload = run_project(config); break;
      case Command::Certify: payload = run_certify(config); break;
      case Command::Generate: payload = run_generate(config); break;
    }
  } catch (const Error& e) {
    result.exit_code = exit_code_for(e.code());
    result.error = to_string(config.command) + ": " + e.what();
    payload.value = {{"error", {{"code", error_name(e.code())}, {"message", result.error}}}};
  } catch (const std::exception& e) {
    result.exit_code = kExitUsage;
    result.error = to_string(config.command) + ": " + e.what();
    payload.value = {{"error", {{"code", "internal"}, {"message", result.error}}}};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log(1, to_string(config.command) + " finished in " + std::to_string(seconds) + " s");
  if (result.error.empty()) {
    result.exit_code = payload.exit_code;
    if (config.command == Command::Certify) {
      result.report = std::move(payload.value);
    } else {
      result.report = {{"schema_version", kReportSchemaVersion}, {"version", kVersion},
                       {"command", to_string(config.command)}, {"config", to_json(config)},
                       {"wall_time_seconds", seconds}, {"payload", std::move(payload.value)}};
    }
  } else {
    result.report = {{"schema_version", kReportSchemaVersion}, {"version", kVersion},
                     {"command", to_string(config.command)}, {"config", to_json(config)},
                     {"wall_time_seconds", seconds}, {"error", payload.value["error"]}};
  }
  if (!config.out.empty()) {
    std::ofstream out(config.out, std::ios::binary);
    if (!out || !(out << render_report(result.report))) {
      if (result.error.empty()) result.error = "cannot write '" + config.out + "'";
      result.exit_code = kExitIo;
    }
  }
  return result;
}

}  // namespace entdecon
