#include "entdecon/entdecon.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "entdecon/costs.hpp"
#include "entdecon/deconvolution.hpp"
#include "entdecon/error.hpp"
#include "entdecon/measures.hpp"
#include "entdecon/relaxed.hpp"
#include "entdecon/report.hpp"
#include "entdecon/sinkhorn.hpp"

struct ed_measure {
  entdecon::DiscreteMeasure m;
};

namespace {

thread_local std::string last_error;

ed_status status_for(entdecon::ErrorCode code) {
  switch (code) {
    case entdecon::ErrorCode::InvalidArgument: return ED_INVALID_ARGUMENT;
    case entdecon::ErrorCode::DimensionMismatch: return ED_DIMENSION_MISMATCH;
    case entdecon::ErrorCode::Infeasible: return ED_INFEASIBLE;
    case entdecon::ErrorCode::NotConverged: return ED_NOT_CONVERGED;
    case entdecon::ErrorCode::Io: return ED_IO;
    case entdecon::ErrorCode::Parse: return ED_PARSE;
  }
  return ED_INTERNAL;
}

ed_status fail(ed_status s, std::string msg) {
  last_error = std::move(msg);
  return s;
}

// Runs body, mapping every exception onto a status; nothing escapes the C boundary.
template <class F>
ed_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return ED_OK;
  } catch (const entdecon::Error& e) {
    return fail(status_for(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ED_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ED_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ED_INTERNAL, e.what());
  } catch (...) {
    return fail(ED_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw entdecon::Error(entdecon::ErrorCode::InvalidArgument, what);
}

nlohmann::json parse_spec(const char* text, const char* what) {
  require(text != nullptr, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw entdecon::Error(entdecon::ErrorCode::Parse, std::string(what) + ": " + e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ed_version(void) { return entdecon::kVersion; }

const char* ed_status_name(ed_status status) {
  switch (status) {
    case ED_OK: return "ok";
    case ED_INVALID_ARGUMENT: return "invalid-argument";
    case ED_DIMENSION_MISMATCH: return "dimension-mismatch";
    case ED_INFEASIBLE: return "infeasible";
    case ED_NOT_CONVERGED: return "not-converged";
    case ED_IO: return "io";
    case ED_PARSE: return "parse";
    case ED_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ed_last_error(void) { return last_error.c_str(); }

ed_status ed_measure_create(size_t dim, size_t n, const double* atoms, const double* weights, ed_measure** out) {
  return guarded([&] {
    require(out != nullptr && atoms != nullptr && weights != nullptr, "ed_measure_create: null pointer");
    *out = nullptr;
    std::vector<entdecon::Point> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i].assign(atoms + i * dim, atoms + (i + 1) * dim);
    *out = new ed_measure{entdecon::DiscreteMeasure(dim, std::move(pts), std::vector<double>(weights, weights + n))};
  });
}

ed_status ed_measure_load(const char* path, ed_measure** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "ed_measure_load: null pointer");
    *out = nullptr;
    const std::string p(path);
    const auto ext = std::filesystem::path(p).extension().string();
    if (ext == ".csv" || ext == ".CSV") {
      *out = new ed_measure{entdecon::empirical_measure(entdecon::load_sample(p))};
    } else {
      *out = new ed_measure{entdecon::load_measure(p)};
    }
  });
}

void ed_measure_free(ed_measure* m) { delete m; }

size_t ed_measure_size(const ed_measure* m) { return m == nullptr ? 0 : m->m.size(); }

size_t ed_measure_dim(const ed_measure* m) { return m == nullptr ? 0 : m->m.dim(); }

ed_status ed_measure_weights(const ed_measure* m, double* out) {
  return guarded([&] {
    require(m != nullptr && out != nullptr, "ed_measure_weights: null pointer");
    std::copy(m->m.weights().begin(), m->m.weights().end(), out);
  });
}

ed_status ed_measure_atoms(const ed_measure* m, double* out) {
  return guarded([&] {
    require(m != nullptr && out != nullptr, "ed_measure_atoms: null pointer");
    for (const auto& a : m->m.atoms()) out = std::copy(a.begin(), a.end(), out);
  });
}

ed_status ed_sinkhorn(const ed_measure* mu, const ed_measure* nu, const char* cost_json, double sigma2,
                      double tolerance, size_t max_iterations, double* objective, double* marginal_error) {
  return guarded([&] {
    require(mu != nullptr && nu != nullptr, "ed_sinkhorn: null measure");
    const auto cost = entdecon::cost_from_json(parse_spec(cost_json, "cost spec"), mu->m.dim());
    entdecon::SolverConfig cfg;
    if (tolerance > 0) cfg.tolerance = tolerance;
    if (max_iterations > 0) cfg.max_iterations = max_iterations;
    const auto sol = entdecon::sinkhorn(mu->m, nu->m, cost, sigma2, cfg);
    if (objective != nullptr) *objective = sol.objective;
    if (marginal_error != nullptr) *marginal_error = sol.marginal_error;
  });
}

ed_status ed_relaxed(const ed_measure* p, const ed_measure* nu, const char* cost_json, double sigma2, double* value) {
  return guarded([&] {
    require(p != nullptr && nu != nullptr, "ed_relaxed: null measure");
    const auto cost = entdecon::cost_from_json(parse_spec(cost_json, "cost spec"), p->m.dim());
    const auto sol = entdecon::relaxed_transport(p->m, nu->m, cost, sigma2);
    if (value != nullptr) *value = sol.value;
  });
}

ed_status ed_log_likelihood(const ed_measure* p, size_t n, const double* points, const char* noise_json,
                            double* value) {
  return guarded([&] {
    require(p != nullptr && points != nullptr, "ed_log_likelihood: null pointer");
    const size_t dim = p->m.dim();
    const auto noise = entdecon::noise_from_json(parse_spec(noise_json, "noise spec"), dim);
    std::vector<entdecon::Point> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i].assign(points + i * dim, points + (i + 1) * dim);
    const auto r = entdecon::log_likelihood(p->m, entdecon::Sample(std::move(pts)), noise);
    if (value != nullptr) *value = r.value;
  });
}

ed_status ed_run_json(const char* config_json, char** report, int* exit_code) {
  return guarded([&] {
    require(config_json != nullptr && report != nullptr && exit_code != nullptr, "ed_run_json: null pointer");
    *report = nullptr;
    *exit_code = entdecon::kExitUsage;
    const auto cfg = entdecon::run_config_from_json(parse_spec(config_json, "run config"));
    const auto result = entdecon::run(cfg);
    *report = copy_string(entdecon::render_report(result.report));
    *exit_code = result.exit_code;
    last_error = result.error;
  });
}

void ed_string_free(char* s) { std::free(s); }

}  // extern "C"
