#include "riskrank.h"

#include <cstring>
#include <new>
#include <span>
#include <string>

#include <json.hpp>

#include "riskrank/corpus.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/panel.hpp"
#include "riskrank/risk.hpp"
#include "riskrank/runner.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
rr_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RR_OK;
  } catch (const riskrank::InputError& e) {
    set_error(e.what());
    return RR_INPUT_ERROR;
  } catch (const riskrank::ConfigError& e) {
    set_error(e.what());
    return RR_CONFIG_ERROR;
  } catch (const nlohmann::json::exception& e) {
    set_error(std::string("config: ") + e.what());
    return RR_CONFIG_ERROR;
  } catch (const std::exception& e) {
    set_error(e.what());
    return RR_INTERNAL_ERROR;
  } catch (...) {
    set_error("unknown error");
    return RR_INTERNAL_ERROR;
  }
}

nlohmann::json parse_overrides(const char* config_json) {
  if (config_json == nullptr || *config_json == '\0') return nlohmann::json::object();
  return nlohmann::json::parse(config_json);
}

const riskrank::Corpus* unwrap(const rr_corpus* corpus) {
  return reinterpret_cast<const riskrank::Corpus*>(corpus);
}

}  // namespace

extern "C" {

const char* rr_version(void) { return "0.1.0"; }

const char* rr_last_error(void) { return g_last_error.c_str(); }

rr_status rr_corpus_open(const char* path, double bound_lo, double bound_hi,
                         const double* truncate_l, rr_corpus** out) {
  if (path == nullptr || out == nullptr) {
    set_error("rr_corpus_open: path and out must be non-null");
    return RR_CONFIG_ERROR;
  }
  *out = nullptr;
  return guard([&] {
    std::optional<double> trunc;
    if (truncate_l != nullptr) trunc = *truncate_l;
    auto* corpus = new riskrank::Corpus(
        riskrank::ingest_corpus(path, riskrank::Bounds{bound_lo, bound_hi}, trunc));
    *out = reinterpret_cast<rr_corpus*>(corpus);
  });
}

void rr_corpus_close(rr_corpus* corpus) {
  delete reinterpret_cast<riskrank::Corpus*>(corpus);
}

long rr_corpus_prompt_count(const rr_corpus* corpus) {
  if (corpus == nullptr) return -1;
  return static_cast<long>(unwrap(corpus)->pools.size());
}

long rr_corpus_scorer_count(const rr_corpus* corpus) {
  if (corpus == nullptr) return -1;
  return static_cast<long>(unwrap(corpus)->scorer_ids.size());
}

rr_status rr_run_select(const rr_corpus* corpus, const char* config_json, const char* out_dir) {
  if (corpus == nullptr || out_dir == nullptr) {
    set_error("rr_run_select: corpus and out_dir must be non-null");
    return RR_CONFIG_ERROR;
  }
  return guard([&] {
    const auto config = riskrank::run::resolve_config("select", parse_overrides(config_json));
    riskrank::run::cmd_select(*unwrap(corpus), config, out_dir);
  });
}

rr_status rr_run_evaluate(const rr_corpus* corpus, const char* config_json, const char* out_dir) {
  if (corpus == nullptr || out_dir == nullptr) {
    set_error("rr_run_evaluate: corpus and out_dir must be non-null");
    return RR_CONFIG_ERROR;
  }
  return guard([&] {
    const auto config = riskrank::run::resolve_config("evaluate", parse_overrides(config_json));
    riskrank::run::cmd_evaluate(*unwrap(corpus), config, out_dir);
  });
}

rr_status rr_run_calibrate(const rr_corpus* corpus, const char* config_json, const char* out_dir) {
  if (corpus == nullptr || out_dir == nullptr) {
    set_error("rr_run_calibrate: corpus and out_dir must be non-null");
    return RR_CONFIG_ERROR;
  }
  return guard([&] {
    const auto config = riskrank::run::resolve_config("calibrate", parse_overrides(config_json));
    riskrank::run::cmd_calibrate(*unwrap(corpus), config, out_dir);
  });
}

rr_status rr_run_simulate(const char* config_json, const char* out_dir) {
  if (out_dir == nullptr) {
    set_error("rr_run_simulate: out_dir must be non-null");
    return RR_CONFIG_ERROR;
  }
  return guard([&] {
    const auto config = riskrank::run::resolve_config("simulate", parse_overrides(config_json));
    riskrank::run::cmd_simulate(config, out_dir);
  });
}

rr_status rr_run_verify(const char* config_json, const char* out_dir) {
  if (out_dir == nullptr) {
    set_error("rr_run_verify: out_dir must be non-null");
    return RR_CONFIG_ERROR;
  }
  int violations = 0;
  const rr_status status = guard([&] {
    const auto config = riskrank::run::resolve_config("verify", parse_overrides(config_json));
    violations = riskrank::run::cmd_verify(config, out_dir);
  });
  if (status != RR_OK) return status;
  if (violations > 0) {
    set_error(std::to_string(violations) + " verification violation(s); see verify.json");
    return RR_VERIFY_FAILED;
  }
  return RR_OK;
}

namespace {

rr_status check_values(const double* values, long n, double* out) {
  if (values == nullptr || out == nullptr || n < 1) {
    set_error("kernel: values/out must be non-null and n >= 1");
    return RR_CONFIG_ERROR;
  }
  return RR_OK;
}

}  // namespace

rr_status rr_entropic_value(const double* values, long n, double beta, double* out) {
  if (const rr_status s = check_values(values, n, out); s != RR_OK) return s;
  return guard([&] {
    *out = riskrank::entropic_value(std::span<const double>(values, static_cast<std::size_t>(n)), beta);
  });
}

rr_status rr_risk_premium(const double* values, long n, double beta, double* out) {
  if (const rr_status s = check_values(values, n, out); s != RR_OK) return s;
  return guard([&] {
    *out = riskrank::risk_premium(std::span<const double>(values, static_cast<std::size_t>(n)), beta);
  });
}

rr_status rr_empirical_cvar(const double* values, long n, double alpha, double* out) {
  if (const rr_status s = check_values(values, n, out); s != RR_OK) return s;
  return guard([&] {
    *out = riskrank::empirical_cvar(std::span<const double>(values, static_cast<std::size_t>(n)), alpha);
  });
}

rr_status rr_chi2_robust_mean(const double* values, long n, double rho, double* out_value,
                              int* out_tight) {
  if (const rr_status s = check_values(values, n, out_value); s != RR_OK) return s;
  if (out_tight == nullptr) {
    set_error("rr_chi2_robust_mean: out_tight must be non-null");
    return RR_CONFIG_ERROR;
  }
  return guard([&] {
    const auto stats =
        riskrank::sample_stats(std::span<const double>(values, static_cast<std::size_t>(n)));
    const auto rm = riskrank::chi2_robust_mean(stats, rho);
    *out_value = rm.value;
    *out_tight = rm.tight ? 1 : 0;
  });
}

rr_status rr_soft_worst_case(const double* values, long m, double gamma, double* out) {
  if (const rr_status s = check_values(values, m, out); s != RR_OK) return s;
  return guard([&] {
    *out = riskrank::aggregate_values(std::span<const double>(values, static_cast<std::size_t>(m)), gamma);
  });
}

rr_status rr_lcb_bounded(const double* values, long n, long k_candidates, double delta,
                         double alpha_scale, double bound_lo, double bound_hi, double* out) {
  if (const rr_status s = check_values(values, n, out); s != RR_OK) return s;
  return guard([&] {
    riskrank::RiskConfig cfg;
    cfg.delta = delta;
    cfg.alpha_scale = alpha_scale;
    const auto stats =
        riskrank::sample_stats(std::span<const double>(values, static_cast<std::size_t>(n)));
    *out = riskrank::lcb_bounded(stats, static_cast<int>(k_candidates), cfg,
                                 riskrank::Bounds{bound_lo, bound_hi});
  });
}

}  // extern "C"
