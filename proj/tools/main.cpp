// riskrank command-line tool. Talks to the engine exclusively through the
// shared-library C API in riskrank.h. Flags map one-to-one onto config
// fields; a --config file may set anything a flag can, and a flag that is
// actually given on the command line wins over the file. Unset fields fall
// back to the library defaults echoed in <out>/config.json.
//
// Exit codes: 0 ok, 1 verification failure, 2 input error, 3 config error.

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskrank.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitInputError = 2;
constexpr int kExitConfigError = 3;

int status_to_exit(rr_status status) {
  switch (status) {
    case RR_OK: return kExitOk;
    case RR_VERIFY_FAILED: return kExitVerifyFailed;
    case RR_INPUT_ERROR: return kExitInputError;
    case RR_CONFIG_ERROR: return kExitConfigError;
    case RR_INTERNAL_ERROR: return kExitInputError;
  }
  return kExitInputError;
}

int report_failure(rr_status status) {
  std::cerr << "error: " << rr_last_error() << "\n";
  return status_to_exit(status);
}

// Applies a flag value at a config path, but only when the flag was given.
struct Binder {
  json& config;

  json* node(std::initializer_list<const char*> path) {
    json* cur = &config;
    for (const char* key : path) cur = &(*cur)[key];
    return cur;
  }
  template <typename T>
  void set(const CLI::Option* opt, std::initializer_list<const char*> path, const T& value) {
    if (opt != nullptr && opt->count() > 0) *node(path) = value;
  }
};

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) grid.push_back(std::stod(item));
  return grid;
}

std::vector<std::string> parse_names(const std::string& csv) {
  std::vector<std::string> names;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) names.push_back(item);
  return names;
}

struct CommonFlags {
  std::string input;
  std::string out_dir = "out";
  std::string config_file;
  double bound_lo = -10.0;
  double bound_hi = 10.0;
  double truncate_l = 0.0;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::string scorer;
  std::string split_mode = "auto";
  double select_fraction = 0.5;
  CLI::Option* bound_lo_opt = nullptr;
  CLI::Option* bound_hi_opt = nullptr;
  CLI::Option* truncate_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* parallelism_opt = nullptr;
  CLI::Option* scorer_opt = nullptr;
  CLI::Option* split_opt = nullptr;
  CLI::Option* fraction_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_input) {
  if (needs_input) cmd->add_option("--input", flags.input, "corpus JSONL path")->required();
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--config", flags.config_file, "JSON config file; flags override its fields");
  flags.bound_lo_opt = cmd->add_option("--bound-lo", flags.bound_lo, "score lower bound");
  flags.bound_hi_opt = cmd->add_option("--bound-hi", flags.bound_hi, "score upper bound");
  flags.truncate_opt =
      cmd->add_option("--truncate-l", flags.truncate_l, "clip scores to [-L, L] before validation");
  flags.seed_opt = cmd->add_option("--seed", flags.seed, "master seed");
  flags.parallelism_opt = cmd->add_option(
      "--parallelism", flags.parallelism,
      "worker threads over prompts (default: RISKRANK_PARALLELISM or 1)");
  flags.scorer_opt =
      cmd->add_option("--scorer", flags.scorer, "designated scorer id (default: first in corpus)");
  flags.split_opt = cmd->add_option(
      "--split", flags.split_mode, "selection/evaluation split: auto|eval_field|index|none");
  flags.fraction_opt = cmd->add_option("--select-fraction", flags.select_fraction,
                                       "share of samples kept for selection under an index split");
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file: " << path << "\n";
    std::exit(kExitConfigError);
  }
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    std::cerr << "error: config file: " << e.what() << "\n";
    std::exit(kExitConfigError);
  }
}

json build_common_config(const CommonFlags& flags) {
  json config = load_config_file(flags.config_file);
  Binder bind{config};
  if (!flags.input.empty()) config["input"] = flags.input;
  bind.set(flags.bound_lo_opt, {"bounds"},
           json::array({flags.bound_lo, flags.bound_hi}));
  bind.set(flags.bound_hi_opt, {"bounds"},
           json::array({flags.bound_lo, flags.bound_hi}));
  bind.set(flags.truncate_opt, {"truncate_l"}, flags.truncate_l);
  bind.set(flags.seed_opt, {"seed"}, flags.seed);
  if (flags.parallelism_opt->count() > 0) {
    config["parallelism"] = flags.parallelism;
  } else if (!config.contains("parallelism")) {
    if (const char* env = std::getenv("RISKRANK_PARALLELISM"))
      config["parallelism"] = std::atoi(env);
  }
  bind.set(flags.scorer_opt, {"scorer"}, flags.scorer);
  bind.set(flags.split_opt, {"split", "mode"}, flags.split_mode);
  bind.set(flags.fraction_opt, {"split", "select_fraction"}, flags.select_fraction);
  return config;
}

class CorpusHandle {
 public:
  CorpusHandle() = default;
  ~CorpusHandle() { rr_corpus_close(corpus_); }
  CorpusHandle(const CorpusHandle&) = delete;
  CorpusHandle& operator=(const CorpusHandle&) = delete;

  // Bounds/truncation resolve from flag, then config file, then defaults.
  rr_status open(const CommonFlags& flags, const json& config) {
    double lo = -10.0, hi = 10.0;
    std::optional<double> trunc;
    if (config.contains("bounds") && config["bounds"].is_array()) {
      lo = config["bounds"].at(0).get<double>();
      hi = config["bounds"].at(1).get<double>();
    }
    if (config.contains("truncate_l") && config["truncate_l"].is_number())
      trunc = config["truncate_l"].get<double>();
    const double trunc_value = trunc.value_or(0.0);
    return rr_corpus_open(flags.input.c_str(), lo, hi, trunc ? &trunc_value : nullptr, &corpus_);
  }
  const rr_corpus* get() const { return corpus_; }

 private:
  rr_corpus* corpus_ = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-aware best-of-K reranking engine"};
  app.require_subcommand(1);

  CommonFlags select_flags, eval_flags, cal_flags, sim_flags, verify_flags;

  // select
  auto* select_cmd = app.add_subcommand("select", "run selection rules over a corpus");
  add_common(select_cmd, select_flags, true);
  std::string rules_csv = "mean";
  double sel_beta = 1.0, sel_delta = 0.1, sel_alpha_scale = 1.0, sel_cvar_alpha = 0.1;
  double sel_tau = 0.0, sel_tau_q = 0.25, sel_lambda_pen = 1.0, sel_epsilon = 0.25;
  double sel_lambda_md = 1.0, sel_alpha_mc = 1.0, sel_beta_rbon = 0.02, sel_poisson = 12.0;
  double sel_alpha_caution = 1.0;
  std::string tau_objective = "entropic";
  bool panel = false, no_normalize = false;
  double gamma = 1.0;
  std::string panel_rules_csv = "entropic,tau,eps";
  auto* rules_opt = select_cmd->add_option("--rules", rules_csv, "comma-separated rules to run");
  auto* beta_opt = select_cmd->add_option("--beta", sel_beta, "entropic temperature");
  auto* delta_opt = select_cmd->add_option("--delta", sel_delta, "LCB failure probability");
  auto* alpha_scale_opt =
      select_cmd->add_option("--alpha-scale", sel_alpha_scale, "LCB penalty scale");
  auto* cvar_alpha_opt =
      select_cmd->add_option("--cvar-alpha", sel_cvar_alpha, "per-candidate CVaR tail fraction");
  auto* tau_opt = select_cmd->add_option("--tau", sel_tau, "risk-premium budget");
  auto* tau_q_opt = select_cmd->add_option("--tau-quantile", sel_tau_q,
                                           "set tau to this pool quantile of risk premia");
  auto* tau_obj_opt =
      select_cmd->add_option("--tau-objective", tau_objective, "tau rule objective: entropic|mean");
  auto* lambda_pen_opt =
      select_cmd->add_option("--lambda-pen", sel_lambda_pen, "risk-premium penalty weight");
  auto* epsilon_opt =
      select_cmd->add_option("--epsilon", sel_epsilon, "near-optimal margin for the eps rule");
  auto* lambda_md_opt =
      select_cmd->add_option("--lambda-md", sel_lambda_md, "mean-dispersion penalty weight");
  auto* alpha_mc_opt =
      select_cmd->add_option("--alpha-mc", sel_alpha_mc, "mc_dropout dispersion penalty");
  auto* beta_rbon_opt =
      select_cmd->add_option("--beta-rbon", sel_beta_rbon, "reference log-likelihood weight");
  auto* poisson_opt =
      select_cmd->add_option("--poisson-lambda", sel_poisson, "bop candidate-budget rate");
  auto* alpha_caution_opt =
      select_cmd->add_option("--alpha-caution", sel_alpha_caution, "error-score penalty weight");
  auto* panel_opt =
      select_cmd->add_flag("--multi-scorer", panel, "also run scorer-robust panel rules");
  auto* gamma_opt =
      select_cmd->add_option("--gamma", gamma, "soft worst-case temperature over scorers");
  auto* no_norm_opt = select_cmd->add_flag("--no-normalize", no_normalize,
                                           "disable within-prompt scorer normalization");
  auto* panel_rules_opt =
      select_cmd->add_option("--panel-rules", panel_rules_csv, "panel rules: entropic,tau,eps");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score selections on the evaluation view");
  add_common(eval_cmd, eval_flags, true);
  std::string selections_path;
  eval_cmd->add_option("--selections", selections_path, "selections JSONL from `select`")->required();
  double lambda_eval = 1.99, cvar_prompts = 0.1, hv_fraction = 0.2, wtl_eps = 0.0, overlap_q = 0.2;
  int bucket_count = 5;
  std::string base_rule = "mean", risk_view = "selection";
  auto* lambda_eval_opt = eval_cmd->add_option("--lambda-eval", lambda_eval, "tradeoff weight");
  auto* cvar_prompts_opt =
      eval_cmd->add_option("--cvar-prompts", cvar_prompts, "prompt-level CVaR tail fraction");
  auto* hv_opt =
      eval_cmd->add_option("--hv-fraction", hv_fraction, "high-disagreement subset share");
  auto* wtl_opt = eval_cmd->add_option("--wtl-eps", wtl_eps, "win/tie/loss tie threshold");
  auto* buckets_opt = eval_cmd->add_option("--buckets", bucket_count, "bucket count for delta tables");
  auto* overlap_opt = eval_cmd->add_option("--overlap-q", overlap_q, "top-q overlap fraction");
  auto* base_rule_opt = eval_cmd->add_option("--base-rule", base_rule, "baseline rule for deltas");
  auto* risk_view_opt =
      eval_cmd->add_option("--risk-view", risk_view, "risk column source: selection|eval");

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate", "grid-sweep decoder knobs on a dev corpus");
  add_common(cal_cmd, cal_flags, true);
  std::string cal_rule = "eps", cal_objective = "tradeoff";
  std::string beta_grid = "1", epsilon_grid = "0.25", tau_q_grid = "0.25", lambda_grid = "0";
  double cal_lambda_eval = 1.99;
  auto* cal_rule_opt = cal_cmd->add_option("--rule", cal_rule, "rule to calibrate");
  auto* cal_obj_opt = cal_cmd->add_option("--objective", cal_objective, "tradeoff|cvar10");
  auto* beta_grid_opt = cal_cmd->add_option("--beta-grid", beta_grid, "comma-separated beta values");
  auto* epsilon_grid_opt =
      cal_cmd->add_option("--epsilon-grid", epsilon_grid, "comma-separated epsilon values");
  auto* tau_grid_opt =
      cal_cmd->add_option("--tau-quantile-grid", tau_q_grid, "comma-separated tau quantiles");
  auto* lambda_grid_opt =
      cal_cmd->add_option("--lambda-grid", lambda_grid, "comma-separated penalty weights");
  auto* cal_lambda_eval_opt = cal_cmd->add_option("--lambda-eval", cal_lambda_eval, "tradeoff weight");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate synthetic corpora and run experiments");
  add_common(sim_cmd, sim_flags, false);
  int num_prompts = 200, k_candidates = 16, n_samples = 5, n_eval = 5;
  double sim_bound_lo = 0.0, sim_bound_hi = 10.0;
  double high_fraction = 0.25, high_gap = 5.0, low_gap = 0.0, noise_std = 0.5;
  double proxy_bias = 0.0, proxy_noise = 0.0;
  int coverage_trials = 0, proxy_trials = 0;
  double sim_delta = 0.1, sim_alpha_scale = 1.0;
  std::string trend_seeds_csv, trend_rule = "eps";
  double sim_epsilon = 0.25, sim_lambda_eval = 1.99;
  auto* prompts_opt = sim_cmd->add_option("--prompts", num_prompts, "number of prompts");
  auto* k_opt = sim_cmd->add_option("--k", k_candidates, "candidates per prompt");
  auto* n_opt = sim_cmd->add_option("--n", n_samples, "selection samples per candidate");
  auto* n_eval_opt = sim_cmd->add_option("--n-eval", n_eval, "evaluation samples per candidate");
  auto* sim_lo_opt = sim_cmd->add_option("--sim-bound-lo", sim_bound_lo, "scenario score lower bound");
  auto* sim_hi_opt = sim_cmd->add_option("--sim-bound-hi", sim_bound_hi, "scenario score upper bound");
  auto* high_frac_opt =
      sim_cmd->add_option("--high-fraction", high_fraction, "share of high-disagreement prompts");
  auto* high_gap_opt =
      sim_cmd->add_option("--high-gap", high_gap, "group-mean gap on high-disagreement prompts");
  auto* low_gap_opt = sim_cmd->add_option("--low-gap", low_gap, "group-mean gap elsewhere");
  auto* noise_opt = sim_cmd->add_option("--noise-std", noise_std, "per-group rater noise");
  auto* proxy_bias_opt =
      sim_cmd->add_option("--proxy-bias", proxy_bias, "proxy mean bias magnitude (eps_mu)");
  auto* proxy_noise_opt =
      sim_cmd->add_option("--proxy-noise", proxy_noise, "proxy dispersion error magnitude (eps_sigma)");
  auto* coverage_opt =
      sim_cmd->add_option("--coverage-trials", coverage_trials, "LCB joint-coverage trials");
  auto* proxy_cov_opt =
      sim_cmd->add_option("--proxy-coverage-trials", proxy_trials, "proxy-robust coverage trials");
  auto* sim_delta_opt = sim_cmd->add_option("--delta", sim_delta, "LCB failure probability");
  auto* sim_alpha_opt = sim_cmd->add_option("--alpha-scale", sim_alpha_scale, "LCB penalty scale");
  auto* trend_seeds_opt =
      sim_cmd->add_option("--trend-seeds", trend_seeds_csv, "comma-separated seeds for the trend run");
  auto* trend_rule_opt =
      sim_cmd->add_option("--trend-rule", trend_rule, "decoder compared against the mean baseline");
  auto* sim_eps_opt =
      sim_cmd->add_option("--epsilon", sim_epsilon, "near-optimal margin for the eps rule");
  auto* sim_lambda_eval_opt = sim_cmd->add_option("--lambda-eval", sim_lambda_eval, "tradeoff weight");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle-equivalence suites");
  add_common(verify_cmd, verify_flags, false);
  int cases_kl = 1000, cases_chi2 = 300, cases_lr = 100, cases_scorer = 1000, max_n = 6;
  double oracle_tol = 1e-6;
  auto* kl_opt = verify_cmd->add_option("--cases-kl", cases_kl, "KL-oracle case count");
  auto* chi2_opt = verify_cmd->add_option("--cases-chi2", cases_chi2, "chi-square oracle case count");
  auto* lr_opt =
      verify_cmd->add_option("--cases-lambda-rho", cases_lr, "lambda-rho identity case count");
  auto* scorer_cases_opt =
      verify_cmd->add_option("--cases-scorer", cases_scorer, "scorer-aggregation case count");
  auto* max_n_opt = verify_cmd->add_option(
      "--max-n", max_n, "largest sample size drawn (beyond-cap cases are skipped)");
  auto* tol_opt = verify_cmd->add_option("--oracle-tol", oracle_tol, "oracle agreement tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  if (select_cmd->parsed()) {
    json config = build_common_config(select_flags);
    Binder bind{config};
    bind.set(beta_opt, {"risk", "beta"}, sel_beta);
    bind.set(delta_opt, {"risk", "delta"}, sel_delta);
    bind.set(alpha_scale_opt, {"risk", "alpha_scale"}, sel_alpha_scale);
    bind.set(cvar_alpha_opt, {"risk", "cvar_alpha"}, sel_cvar_alpha);
    if (rules_opt->count() > 0 || !config.contains("rules")) {
      json rules = json::array();
      for (const auto& name : parse_names(rules_csv)) {
        json entry = {{"rule", name}};
        if (tau_opt->count() > 0) entry["tau"] = sel_tau;
        if (tau_q_opt->count() > 0) entry["tau_quantile"] = sel_tau_q;
        if (tau_obj_opt->count() > 0) entry["tau_objective"] = tau_objective;
        if (lambda_pen_opt->count() > 0) entry["lambda_pen"] = sel_lambda_pen;
        if (epsilon_opt->count() > 0) entry["epsilon"] = sel_epsilon;
        if (lambda_md_opt->count() > 0) entry["lambda_md"] = sel_lambda_md;
        if (alpha_mc_opt->count() > 0) entry["alpha_mc"] = sel_alpha_mc;
        if (beta_rbon_opt->count() > 0) entry["beta_rbon"] = sel_beta_rbon;
        if (poisson_opt->count() > 0) entry["poisson_lambda"] = sel_poisson;
        if (alpha_caution_opt->count() > 0) entry["alpha_caution"] = sel_alpha_caution;
        rules.push_back(entry);
      }
      config["rules"] = rules;
    }
    if (panel_opt->count() > 0) config["panel"]["enabled"] = panel;
    bind.set(gamma_opt, {"panel", "gamma"}, gamma);
    if (no_norm_opt->count() > 0) config["panel"]["normalize"] = !no_normalize;
    const bool panel_enabled =
        config.contains("panel") && config["panel"].value("enabled", false);
    if (panel_enabled && (panel_rules_opt->count() > 0 || !config["panel"].contains("rules") ||
                          config["panel"]["rules"].empty())) {
      json names = json::array();
      for (const auto& name : parse_names(panel_rules_csv)) names.push_back(name);
      config["panel"]["rules"] = names;
    }
    CorpusHandle corpus;
    if (const rr_status s = corpus.open(select_flags, config); s != RR_OK)
      return report_failure(s);
    const rr_status s =
        rr_run_select(corpus.get(), config.dump().c_str(), select_flags.out_dir.c_str());
    if (s != RR_OK) return report_failure(s);
    std::cout << "wrote " << select_flags.out_dir << "/selections.jsonl\n";
    return kExitOk;
  }

  if (eval_cmd->parsed()) {
    json config = build_common_config(eval_flags);
    Binder bind{config};
    config["selections"] = selections_path;
    bind.set(lambda_eval_opt, {"eval", "lambda_eval"}, lambda_eval);
    bind.set(cvar_prompts_opt, {"eval", "cvar_alpha_prompts"}, cvar_prompts);
    bind.set(hv_opt, {"eval", "hv_fraction"}, hv_fraction);
    bind.set(wtl_opt, {"eval", "wtl_eps"}, wtl_eps);
    bind.set(buckets_opt, {"eval", "bucket_count"}, bucket_count);
    bind.set(overlap_opt, {"eval", "overlap_q"}, overlap_q);
    bind.set(base_rule_opt, {"eval", "base_rule"}, base_rule);
    bind.set(risk_view_opt, {"eval", "risk_view"}, risk_view);
    CorpusHandle corpus;
    if (const rr_status s = corpus.open(eval_flags, config); s != RR_OK) return report_failure(s);
    const rr_status s =
        rr_run_evaluate(corpus.get(), config.dump().c_str(), eval_flags.out_dir.c_str());
    if (s != RR_OK) return report_failure(s);
    std::cout << "wrote " << eval_flags.out_dir << "/report.csv\n";
    return kExitOk;
  }

  if (cal_cmd->parsed()) {
    json config = build_common_config(cal_flags);
    Binder bind{config};
    bind.set(cal_rule_opt, {"calibrate", "rule"}, cal_rule);
    bind.set(cal_obj_opt, {"calibrate", "objective"}, cal_objective);
    bind.set(beta_grid_opt, {"calibrate", "beta_grid"}, parse_grid(beta_grid));
    bind.set(epsilon_grid_opt, {"calibrate", "epsilon_grid"}, parse_grid(epsilon_grid));
    bind.set(tau_grid_opt, {"calibrate", "tau_quantile_grid"}, parse_grid(tau_q_grid));
    bind.set(lambda_grid_opt, {"calibrate", "lambda_grid"}, parse_grid(lambda_grid));
    bind.set(cal_lambda_eval_opt, {"eval", "lambda_eval"}, cal_lambda_eval);
    CorpusHandle corpus;
    if (const rr_status s = corpus.open(cal_flags, config); s != RR_OK) return report_failure(s);
    const rr_status s =
        rr_run_calibrate(corpus.get(), config.dump().c_str(), cal_flags.out_dir.c_str());
    if (s != RR_OK) return report_failure(s);
    std::cout << "wrote " << cal_flags.out_dir << "/chosen.json\n";
    return kExitOk;
  }

  if (sim_cmd->parsed()) {
    json config = build_common_config(sim_flags);
    Binder bind{config};
    bind.set(prompts_opt, {"scenario", "num_prompts"}, num_prompts);
    bind.set(k_opt, {"scenario", "candidates_per_prompt"}, k_candidates);
    bind.set(n_opt, {"scenario", "samples_per_candidate"}, n_samples);
    bind.set(n_eval_opt, {"scenario", "eval_samples_per_candidate"}, n_eval);
    if (sim_lo_opt->count() > 0 || sim_hi_opt->count() > 0)
      config["scenario"]["bounds"] = json::array({sim_bound_lo, sim_bound_hi});
    bind.set(high_frac_opt, {"scenario", "high_fraction"}, high_fraction);
    bind.set(high_gap_opt, {"scenario", "high_gap"}, high_gap);
    bind.set(low_gap_opt, {"scenario", "low_gap"}, low_gap);
    if (noise_opt->count() > 0)
      config["scenario"]["groups"] = json::array(
          {{{"weight", 0.5}, {"noise_std", noise_std}}, {{"weight", 0.5}, {"noise_std", noise_std}}});
    bind.set(proxy_bias_opt, {"scenario", "proxy_bias_mu"}, proxy_bias);
    bind.set(proxy_noise_opt, {"scenario", "proxy_noise_sigma"}, proxy_noise);
    bind.set(coverage_opt, {"simulate", "coverage_trials"}, coverage_trials);
    bind.set(proxy_cov_opt, {"simulate", "proxy_coverage_trials"}, proxy_trials);
    bind.set(sim_delta_opt, {"risk", "delta"}, sim_delta);
    bind.set(sim_alpha_opt, {"risk", "alpha_scale"}, sim_alpha_scale);
    if (proxy_cov_opt->count() > 0 && proxy_trials > 0)
      config["risk"]["proxy_eps"] = json::array({proxy_bias, proxy_noise});
    if (trend_seeds_opt->count() > 0) {
      json seeds = json::array();
      std::stringstream ss(trend_seeds_csv);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
      config["simulate"]["trend_seeds"] = seeds;
    }
    bind.set(trend_rule_opt, {"simulate", "trend_rule"}, trend_rule);
    bind.set(sim_eps_opt, {"defaults", "epsilon"}, sim_epsilon);
    bind.set(sim_lambda_eval_opt, {"eval", "lambda_eval"}, sim_lambda_eval);
    const rr_status s = rr_run_simulate(config.dump().c_str(), sim_flags.out_dir.c_str());
    if (s != RR_OK) return report_failure(s);
    std::cout << "wrote " << sim_flags.out_dir << "/corpus.jsonl\n";
    return kExitOk;
  }

  if (verify_cmd->parsed()) {
    json config = build_common_config(verify_flags);
    Binder bind{config};
    bind.set(kl_opt, {"verify", "cases_kl"}, cases_kl);
    bind.set(chi2_opt, {"verify", "cases_chi2"}, cases_chi2);
    bind.set(lr_opt, {"verify", "cases_lambda_rho"}, cases_lr);
    bind.set(scorer_cases_opt, {"verify", "cases_scorer"}, cases_scorer);
    bind.set(max_n_opt, {"verify", "max_n"}, max_n);
    bind.set(tol_opt, {"verify", "oracle_tol"}, oracle_tol);
    const rr_status s = rr_run_verify(config.dump().c_str(), verify_flags.out_dir.c_str());
    std::ifstream in(verify_flags.out_dir + "/verify.json");
    if (in) {
      try {
        json report;
        in >> report;
        for (const auto& suite : report["suites"]) {
          std::cout << suite["name"].get<std::string>() << ": " << suite["cases"].get<int>()
                    << " cases, " << suite["failures"].get<int>() << " failures, "
                    << suite["skipped"].get<int>() << " skipped, max error "
                    << suite["max_error"].get<double>() << "\n";
        }
      } catch (const json::exception&) {
      }
    }
    if (s != RR_OK) return report_failure(s);
    std::cout << "all verification suites passed\n";
    return kExitOk;
  }

  return kExitConfigError;
}
