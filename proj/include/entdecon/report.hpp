#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace entdecon {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

enum class Command { Sinkhorn, Relaxed, Mle, Project, Certify, Generate };

std::string to_string(Command c);
Command command_from_string(const std::string& name);

// Process exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitCertificateFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitInfeasible = 4;
inline constexpr int kExitIo = 5;

// Everything a run depends on. Cost, noise and class specs are JSON objects,
// file names of JSON objects, or shorthands ("gaussian", "laplace",
// "p-exponential:3", "wfr-cosine"; "grid:a:b:m", "k-atom:k").
struct RunConfig {
  Command command = Command::Sinkhorn;
  std::string mu;            // measure JSON (sinkhorn: first marginal; relaxed: P; generate: P*)
  std::string nu;            // measure JSON or sample CSV (second marginal)
  std::string sample;        // sample CSV (mle, project)
  nlohmann::json cost;       // sinkhorn, relaxed, project
  nlohmann::json noise;      // mle, generate
  nlohmann::json mixture_class;  // mle, project
  std::string mode = "entropic";  // project: entropic | relaxed | hard
  double sigma2 = 1.0;
  std::optional<double> tolerance;
  std::optional<std::size_t> max_iterations;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;           // report file; empty writes nothing
  bool emit_coupling = false;
  std::string claim = "all";  // certify
  std::string seeds_file;     // certify: JSON array of seeds
  bool exploratory = false;   // certify
  std::size_t n = 0;          // generate
  std::string sample_out;     // generate: CSV of the drawn sample
};

nlohmann::json to_json(const RunConfig& c);
// Unknown keys are rejected so that a typo cannot silently fall back to a default.
RunConfig run_config_from_json(const nlohmann::json& j);

struct RunResult {
  // Envelope {schema_version, version, command, config, wall_time_seconds,
  // payload}; certify instead yields the bare array of certificate reports,
  // which carries no timing so that reruns are byte-identical.
  nlohmann::json report;
  int exit_code = kExitOk;
  std::string error;  // set when the run failed before producing a payload
};

// Never throws: failures become a nonzero exit code and a message. The report
// is also written to config.out when that is set.
RunResult run(const RunConfig& config);

// Canonical rendering: two-space indent, sorted keys, shortest round-trip
// decimals, trailing newline. Parsing and re-rendering is the identity.
std::string render_report(const nlohmann::json& report);

// Diagnostic verbosity from ENTROPIC_DECONV_LOG: 0 silent (default), 1 info,
// 2 debug. Messages go to stderr.
int log_level();

}  // namespace entdecon
