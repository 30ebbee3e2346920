#include "riskrank/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "riskrank/decoders.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/metrics.hpp"
#include "riskrank/panel.hpp"
#include "riskrank/simulator.hpp"
#include "riskrank/verify.hpp"

namespace riskrank::run {

namespace {

using nlohmann::json;

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const int worker_count = std::min<int>(threads, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(worker_count));
  for (int t = 0; t < worker_count; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (error) std::rethrow_exception(error);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open output file: " + path);
  out << content;
}

void ensure_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw InputError("cannot create output directory: " + out_dir);
}

void echo_config(const json& config, const std::string& out_dir) {
  write_file(out_dir + "/config.json", config.dump(2) + "\n");
}

SplitPolicy split_policy_from(const json& config) {
  SplitPolicy policy;
  const auto& split = config.at("split");
  const std::string mode = split.at("mode").get<std::string>();
  if (mode == "auto")
    policy.mode = SplitPolicy::Mode::Auto;
  else if (mode == "eval_field")
    policy.mode = SplitPolicy::Mode::EvalField;
  else if (mode == "index")
    policy.mode = SplitPolicy::Mode::IndexSplit;
  else if (mode == "none")
    policy.mode = SplitPolicy::Mode::None;
  else
    throw ConfigError("config: unknown split mode '" + mode + "'");
  policy.select_fraction = split.at("select_fraction").get<double>();
  return policy;
}

RiskConfig risk_config_from(const json& config) {
  const auto& r = config.at("risk");
  RiskConfig risk;
  risk.beta = r.at("beta").get<double>();
  risk.delta = r.at("delta").get<double>();
  risk.alpha_scale = r.at("alpha_scale").get<double>();
  risk.cvar_alpha = r.at("cvar_alpha").get<double>();
  if (r.contains("subgaussian_nu") && !r["subgaussian_nu"].is_null())
    risk.subgaussian_nu = r["subgaussian_nu"].get<double>();
  if (r.contains("proxy_eps") && !r["proxy_eps"].is_null()) {
    const auto& pe = r["proxy_eps"];
    risk.proxy_eps = std::make_pair(pe.at(0).get<double>(), pe.at(1).get<double>());
  }
  risk.validate();
  return risk;
}

DecoderConfig decoder_config_from(const json& entry, const json& config) {
  DecoderConfig cfg;
  cfg.risk = risk_config_from(config);
  cfg.beta = cfg.risk.beta;
  cfg.seed = config.at("seed").get<std::uint64_t>();
  std::string name;
  if (entry.is_string()) {
    name = entry.get<std::string>();
  } else if (entry.is_object()) {
    name = entry.at("rule").get<std::string>();
    if (entry.contains("beta")) cfg.beta = entry["beta"].get<double>();
    if (entry.contains("tau")) cfg.tau = entry["tau"].get<double>();
    if (entry.contains("tau_quantile")) cfg.tau_quantile = entry["tau_quantile"].get<double>();
    if (entry.contains("tau_objective")) {
      const std::string obj = entry["tau_objective"].get<std::string>();
      if (obj == "entropic")
        cfg.tau_objective = TauObjective::Entropic;
      else if (obj == "mean")
        cfg.tau_objective = TauObjective::Mean;
      else
        throw ConfigError("config: tau_objective must be 'entropic' or 'mean'");
    }
    if (entry.contains("lambda_pen")) cfg.lambda_pen = entry["lambda_pen"].get<double>();
    if (entry.contains("epsilon")) cfg.epsilon = entry["epsilon"].get<double>();
    if (entry.contains("lambda_md")) cfg.lambda_md = entry["lambda_md"].get<double>();
    if (entry.contains("alpha_mc")) cfg.alpha_mc = entry["alpha_mc"].get<double>();
    if (entry.contains("beta_rbon")) cfg.beta_rbon = entry["beta_rbon"].get<double>();
    if (entry.contains("poisson_lambda")) cfg.poisson_lambda = entry["poisson_lambda"].get<double>();
    if (entry.contains("alpha_caution")) cfg.alpha_caution = entry["alpha_caution"].get<double>();
  } else {
    throw ConfigError("config: rule entries must be strings or objects");
  }
  cfg.rule = rule_from_name(name);
  // Fill rule-required knobs from shared defaults so a bare name works.
  const auto& defaults = config.at("defaults");
  switch (cfg.rule) {
    case Rule::Tau:
      if (!cfg.tau && !cfg.tau_quantile) cfg.tau_quantile = defaults.at("tau_quantile").get<double>();
      break;
    case Rule::Lambda:
      if (!cfg.lambda_pen) cfg.lambda_pen = defaults.at("lambda_pen").get<double>();
      break;
    case Rule::Eps:
      if (!cfg.epsilon) cfg.epsilon = defaults.at("epsilon").get<double>();
      break;
    case Rule::MeanDispersion:
      if (!cfg.lambda_md) cfg.lambda_md = defaults.at("lambda_md").get<double>();
      break;
    case Rule::MCDropout:
      if (!cfg.alpha_mc) cfg.alpha_mc = defaults.at("alpha_mc").get<double>();
      break;
    case Rule::RBoN:
      if (!cfg.beta_rbon) cfg.beta_rbon = defaults.at("beta_rbon").get<double>();
      break;
    case Rule::BoP:
      if (!cfg.poisson_lambda) cfg.poisson_lambda = defaults.at("poisson_lambda").get<double>();
      break;
    case Rule::Caution:
      if (!cfg.alpha_caution) cfg.alpha_caution = defaults.at("alpha_caution").get<double>();
      break;
    default:
      break;
  }
  cfg.validate();
  return cfg;
}

EvalConfig eval_config_from(const json& config) {
  const auto& e = config.at("eval");
  EvalConfig cfg;
  cfg.lambda_eval = e.at("lambda_eval").get<double>();
  cfg.cvar_alpha_prompts = e.at("cvar_alpha_prompts").get<double>();
  cfg.hv_fraction = e.at("hv_fraction").get<double>();
  cfg.wtl_eps = e.at("wtl_eps").get<double>();
  cfg.bucket_count = e.at("bucket_count").get<int>();
  cfg.overlap_q = e.at("overlap_q").get<double>();
  cfg.base_rule = e.at("base_rule").get<std::string>();
  const std::string view = e.at("risk_view").get<std::string>();
  if (view == "selection")
    cfg.risk_view = EvalConfig::RiskView::Selection;
  else if (view == "eval")
    cfg.risk_view = EvalConfig::RiskView::Eval;
  else
    throw ConfigError("config: risk_view must be 'selection' or 'eval'");
  cfg.validate();
  return cfg;
}

ScenarioConfig scenario_from(const json& config) {
  const auto& s = config.at("scenario");
  ScenarioConfig cfg;
  cfg.num_prompts = s.at("num_prompts").get<int>();
  cfg.candidates_per_prompt = s.at("candidates_per_prompt").get<int>();
  cfg.samples_per_candidate = s.at("samples_per_candidate").get<int>();
  cfg.eval_samples_per_candidate = s.at("eval_samples_per_candidate").get<int>();
  cfg.bounds.lo = s.at("bounds").at(0).get<double>();
  cfg.bounds.hi = s.at("bounds").at(1).get<double>();
  cfg.groups.clear();
  for (const auto& g : s.at("groups"))
    cfg.groups.push_back({g.at("weight").get<double>(), g.at("noise_std").get<double>()});
  cfg.high_fraction = s.at("high_fraction").get<double>();
  cfg.high_gap = s.at("high_gap").get<double>();
  cfg.low_gap = s.at("low_gap").get<double>();
  cfg.base_lo_frac = s.at("base_lo_frac").get<double>();
  cfg.base_hi_frac = s.at("base_hi_frac").get<double>();
  cfg.proxy_bias_mu = s.at("proxy_bias_mu").get<double>();
  cfg.proxy_noise_sigma = s.at("proxy_noise_sigma").get<double>();
  cfg.seed = config.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

std::string scorer_from(const json& config, const Corpus& corpus) {
  if (config.contains("scorer") && !config["scorer"].is_null()) {
    const std::string scorer = config["scorer"].get<std::string>();
    if (std::find(corpus.scorer_ids.begin(), corpus.scorer_ids.end(), scorer) ==
        corpus.scorer_ids.end())
      throw ConfigError("config: scorer '" + scorer + "' not present in corpus");
    return scorer;
  }
  return corpus.scorer_ids.front();
}

}  // namespace

json resolve_config(const std::string& command, const json& overrides) {
  json config = {
      {"command", command},
      {"input", nullptr},
      {"bounds", json::array({-10.0, 10.0})},
      {"truncate_l", nullptr},
      {"seed", 0},
      {"parallelism", 1},
      {"scorer", nullptr},
      {"split", {{"mode", "auto"}, {"select_fraction", 0.5}}},
      {"risk",
       {{"beta", 1.0},
        {"delta", 0.1},
        {"alpha_scale", 1.0},
        {"cvar_alpha", 0.1},
        {"subgaussian_nu", nullptr},
        {"proxy_eps", nullptr}}},
      {"defaults",
       {{"tau_quantile", 0.25},
        {"lambda_pen", 1.0},
        {"epsilon", 0.25},
        {"lambda_md", 1.0},
        {"alpha_mc", 1.0},
        {"beta_rbon", 0.02},
        {"poisson_lambda", 12.0},
        {"alpha_caution", 1.0}}},
      {"rules", json::array({"mean"})},
      {"panel", {{"enabled", false}, {"gamma", 1.0}, {"normalize", true}, {"rules", json::array()}}},
      {"eval",
       {{"lambda_eval", 1.99},
        {"cvar_alpha_prompts", 0.1},
        {"hv_fraction", 0.2},
        {"wtl_eps", 0.0},
        {"bucket_count", 5},
        {"overlap_q", 0.2},
        {"base_rule", "mean"},
        {"risk_view", "selection"}}},
      {"selections", nullptr},
      {"calibrate",
       {{"rule", "eps"},
        {"objective", "tradeoff"},
        {"beta_grid", json::array({1.0})},
        {"epsilon_grid", json::array({0.25})},
        {"tau_quantile_grid", json::array({0.25})},
        {"lambda_grid", json::array({0.0})}}},
      {"scenario",
       {{"num_prompts", 200},
        {"candidates_per_prompt", 16},
        {"samples_per_candidate", 5},
        {"eval_samples_per_candidate", 5},
        {"bounds", json::array({0.0, 10.0})},
        {"groups", json::array({{{"weight", 0.5}, {"noise_std", 0.5}},
                                {{"weight", 0.5}, {"noise_std", 0.5}}})},
        {"high_fraction", 0.25},
        {"high_gap", 5.0},
        {"low_gap", 0.0},
        {"base_lo_frac", 0.3},
        {"base_hi_frac", 0.7},
        {"proxy_bias_mu", 0.0},
        {"proxy_noise_sigma", 0.0}}},
      {"simulate",
       {{"coverage_trials", 0},
        {"proxy_coverage_trials", 0},
        {"trend_seeds", json::array()},
        {"trend_rule", "eps"}}},
      {"verify",
       {{"cases_kl", 1000},
        {"cases_chi2", 300},
        {"cases_lambda_rho", 100},
        {"cases_scorer", 1000},
        {"max_n", 6},
        {"oracle_tol", 1e-6}}},
  };
  config.merge_patch(overrides);
  config["command"] = command;
  return config;
}

void cmd_select(const Corpus& corpus, const json& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  const SplitPolicy policy = split_policy_from(config);
  const std::string scorer = scorer_from(config, corpus);
  const int threads = std::max(1, config.at("parallelism").get<int>());

  std::vector<DecoderConfig> rules;
  for (const auto& entry : config.at("rules")) rules.push_back(decoder_config_from(entry, config));

  const auto& panel_cfg = config.at("panel");
  const bool panel_enabled = panel_cfg.at("enabled").get<bool>();
  std::vector<std::pair<PanelRule, PanelKnobs>> panel_rules;
  if (panel_enabled) {
    for (const auto& pr : panel_cfg.at("rules")) {
      const std::string name = pr.is_string() ? pr.get<std::string>() : pr.at("rule").get<std::string>();
      PanelKnobs knobs;
      if (pr.is_object()) {
        if (pr.contains("tau")) knobs.tau = pr["tau"].get<double>();
        if (pr.contains("tau_quantile")) knobs.tau_quantile = pr["tau_quantile"].get<double>();
        if (pr.contains("epsilon")) knobs.epsilon = pr["epsilon"].get<double>();
      }
      PanelRule rule;
      if (name == "entropic") {
        rule = PanelRule::Entropic;
      } else if (name == "tau") {
        rule = PanelRule::Tau;
        if (!knobs.tau && !knobs.tau_quantile)
          knobs.tau_quantile = config.at("defaults").at("tau_quantile").get<double>();
      } else if (name == "eps") {
        rule = PanelRule::Eps;
        if (!knobs.epsilon) knobs.epsilon = config.at("defaults").at("epsilon").get<double>();
      } else {
        throw ConfigError("config: unknown panel rule '" + name + "'");
      }
      panel_rules.emplace_back(rule, knobs);
    }
    if (panel_rules.empty()) throw ConfigError("config: panel enabled but no panel rules given");
  }
  if (rules.empty() && panel_rules.empty()) throw ConfigError("config: no rules configured");

  const double gamma = panel_cfg.at("gamma").get<double>();
  const bool normalize = panel_cfg.at("normalize").get<bool>();
  const double beta = config.at("risk").at("beta").get<double>();

  struct PoolOutput {
    std::string prompt_id;
    std::vector<std::string> lines;
  };
  std::vector<PoolOutput> outputs(corpus.pools.size());
  parallel_for(corpus.pools.size(), threads, [&](std::size_t pi) {
    const CandidatePool& pool = corpus.pools[pi];
    const SplitView view = split_select_eval(pool, policy);
    PoolOutput& out = outputs[pi];
    out.prompt_id = pool.prompt_id;
    for (const auto& cfg : rules)
      out.lines.push_back(selection_to_jsonl(select(view.selection, scorer, cfg, corpus.bounds)));
    if (!panel_rules.empty()) {
      const ScorerPanel panel =
          build_panel(view.selection, corpus.scorer_ids, beta, gamma, normalize);
      for (const auto& [rule, knobs] : panel_rules)
        out.lines.push_back(selection_to_jsonl(select_panel(view.selection, panel, rule, knobs)));
    }
  });

  std::sort(outputs.begin(), outputs.end(),
            [](const PoolOutput& a, const PoolOutput& b) { return a.prompt_id < b.prompt_id; });
  std::ostringstream body;
  for (const auto& out : outputs)
    for (const auto& line : out.lines) body << line << '\n';
  write_file(out_dir + "/selections.jsonl", body.str());
  echo_config(config, out_dir);
}

namespace {

SelectionTable read_selections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open selections file: " + path);
  SelectionTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError("selections line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    if (!record.contains("prompt_id") || !record.contains("rule") || !record.contains("candidate_id"))
      throw InputError("selections line " + std::to_string(line_no) +
                       ": need prompt_id, rule, candidate_id");
    table[record["rule"].get<std::string>()][record["prompt_id"].get<std::string>()] =
        record["candidate_id"].get<std::string>();
  }
  if (table.empty()) throw InputError("selections file is empty: " + path);
  return table;
}

}  // namespace

void cmd_evaluate(const Corpus& corpus, const json& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  if (!config.contains("selections") || config["selections"].is_null())
    throw ConfigError("config: evaluate requires a selections path");
  const SelectionTable table = read_selections(config["selections"].get<std::string>());
  const SplitPolicy policy = split_policy_from(config);
  const EvalConfig eval_cfg = eval_config_from(config);
  const EvalReport report = evaluate(corpus, policy, table, eval_cfg);
  write_file(out_dir + "/report.csv", report_csv(report));
  write_file(out_dir + "/report_high_disagreement.csv", hv_report_csv(report));
  write_file(out_dir + "/buckets.csv", buckets_csv(report));
  write_file(out_dir + "/correlations.csv", correlations_csv(report));
  write_file(out_dir + "/overlaps.csv", overlaps_csv(report));
  write_file(out_dir + "/report.json", report_json(report) + "\n");
  echo_config(config, out_dir);
}

void cmd_calibrate(const Corpus& corpus, const json& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  const auto& cal = config.at("calibrate");
  const std::string rule_name_str = cal.at("rule").get<std::string>();
  const Rule rule = rule_from_name(rule_name_str);
  const std::string objective = cal.at("objective").get<std::string>();
  if (objective != "tradeoff" && objective != "cvar10")
    throw ConfigError("config: calibrate objective must be 'tradeoff' or 'cvar10'");
  const SplitPolicy policy = split_policy_from(config);
  const EvalConfig eval_cfg = eval_config_from(config);
  const std::string scorer = scorer_from(config, corpus);

  auto grid_of = [&](const char* name) {
    std::vector<double> grid;
    for (const auto& v : cal.at(name)) grid.push_back(v.get<double>());
    if (grid.empty()) throw ConfigError(std::string("config: empty grid ") + name);
    std::sort(grid.begin(), grid.end());
    return grid;
  };
  const auto betas = grid_of("beta_grid");
  const auto epsilons = grid_of("epsilon_grid");
  const auto tau_qs = grid_of("tau_quantile_grid");
  const auto lambdas = grid_of("lambda_grid");

  // Pre-split views once.
  std::vector<SplitView> views;
  views.reserve(corpus.pools.size());
  for (const auto& pool : corpus.pools) views.push_back(split_select_eval(pool, policy));
  for (const auto& view : views)
    if (!view.has_evaluation) throw InputError("calibrate: evaluation view unavailable");

  struct SweepRow {
    double beta, epsilon, tau_q, lambda, value;
  };
  std::vector<SweepRow> sweep;
  std::optional<SweepRow> best;
  for (double beta : betas) {
    for (double epsilon : epsilons) {
      for (double tau_q : tau_qs) {
        for (double lambda : lambdas) {
          DecoderConfig dc;
          dc.rule = rule;
          dc.risk = risk_config_from(config);
          dc.beta = beta;
          dc.seed = config.at("seed").get<std::uint64_t>();
          // the lambda grid doubles as the generic penalty-weight axis
          switch (rule) {
            case Rule::Tau: dc.tau_quantile = tau_q; break;
            case Rule::Lambda: dc.lambda_pen = lambda; break;
            case Rule::Eps: dc.epsilon = epsilon; break;
            case Rule::MeanDispersion: dc.lambda_md = lambda; break;
            case Rule::MCDropout: dc.alpha_mc = lambda; break;
            case Rule::RBoN: dc.beta_rbon = lambda; break;
            case Rule::BoP: dc.poisson_lambda = lambda; break;
            case Rule::Caution: dc.alpha_caution = lambda; break;
            default: break;
          }
          dc.validate();
          std::vector<double> z, sigma;
          z.reserve(views.size());
          for (const auto& view : views) {
            const SelectionResult sel = select(view.selection, scorer, dc, corpus.bounds);
            std::size_t ci = 0;
            for (std::size_t i = 0; i < view.selection.candidates.size(); ++i)
              if (view.selection.candidates[i].id == sel.candidate_id) ci = i;
            z.push_back(sample_stats(view.evaluation.candidates[ci].samples.at(scorer).values).mean);
            sigma.push_back(
                sample_stats(view.selection.candidates[ci].samples.at(scorer).values).std_dev);
          }
          double value;
          if (objective == "tradeoff") {
            double acc = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i)
              acc += tradeoff(z[i], sigma[i], eval_cfg.lambda_eval);
            value = acc / static_cast<double>(z.size());
          } else {
            value = cvar_over_prompts(z, eval_cfg.cvar_alpha_prompts);
          }
          const SweepRow row{beta, epsilon, tau_q, lambda, value};
          sweep.push_back(row);
          // ties resolve to the smallest knobs; grids are sorted ascending
          if (!best || row.value > best->value) best = row;
        }
      }
    }
  }

  std::ostringstream table;
  table << "beta,epsilon,tau_quantile,lambda,objective,value\n";
  for (const auto& row : sweep)
    table << format_double(row.beta) << ',' << format_double(row.epsilon) << ','
          << format_double(row.tau_q) << ',' << format_double(row.lambda) << ',' << objective << ','
          << format_double(row.value) << '\n';
  write_file(out_dir + "/sweep.csv", table.str());

  json chosen = {{"rule", rule_name_str}, {"objective", objective},
                 {"beta", best->beta},    {"epsilon", best->epsilon},
                 {"tau_quantile", best->tau_q}, {"lambda", best->lambda},
                 {"value", best->value}};
  write_file(out_dir + "/chosen.json", chosen.dump(2) + "\n");
  echo_config(config, out_dir);
}

void cmd_simulate(const json& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  const ScenarioConfig scenario = scenario_from(config);
  const auto& sim = config.at("simulate");

  const GeneratedCorpus gen = generate_corpus(scenario);
  write_corpus_file(gen.corpus, out_dir + "/corpus.jsonl");
  write_truth_file(gen.truth, out_dir + "/ground_truth.jsonl");

  json coverage_out;
  const int trials = sim.at("coverage_trials").get<int>();
  if (trials == 0) {
    coverage_out = {{"trials", 0}, {"note", "no trials"}};
  } else {
    const CoverageResult cov = coverage_experiment(scenario, risk_config_from(config), trials);
    coverage_out = {{"trials", cov.trials}, {"covered", cov.covered}, {"rate", cov.rate}};
  }
  write_file(out_dir + "/coverage.json", coverage_out.dump(2) + "\n");

  const int proxy_trials = sim.at("proxy_coverage_trials").get<int>();
  if (proxy_trials > 0) {
    RiskConfig risk = risk_config_from(config);
    if (!risk.proxy_eps)
      risk.proxy_eps = std::make_pair(scenario.proxy_bias_mu, scenario.proxy_noise_sigma);
    const CoverageResult cov = proxy_coverage_experiment(scenario, risk, proxy_trials);
    json proxy_out = {{"trials", cov.trials}, {"covered", cov.covered}, {"rate", cov.rate}};
    write_file(out_dir + "/proxy_coverage.json", proxy_out.dump(2) + "\n");
  }

  std::vector<std::uint64_t> seeds;
  for (const auto& s : sim.at("trend_seeds")) seeds.push_back(s.get<std::uint64_t>());
  if (!seeds.empty()) {
    DecoderConfig method = decoder_config_from(sim.at("trend_rule"), config);
    const EvalConfig eval_cfg = eval_config_from(config);
    const TrendResult trend = trend_experiment(scenario, method, eval_cfg, seeds);
    std::ostringstream csv;
    csv << "metric,bucket,x,y,ci,count\n";
    for (const auto& row : trend.tradeoff_buckets)
      csv << "delta_tradeoff," << row.bucket << ',' << row.bucket << ',' << format_double(row.mean)
          << ',' << format_double(row.ci_half) << ',' << row.count << '\n';
    for (const auto& row : trend.cvar_buckets)
      csv << "delta_cvar," << row.bucket << ',' << row.bucket << ',' << format_double(row.mean) << ','
          << format_double(row.ci_half) << ',' << row.count << '\n';
    write_file(out_dir + "/trend.csv", csv.str());
    json per_seed = json::array();
    for (const auto& o : trend.per_seed)
      per_seed.push_back({{"seed", o.seed},
                          {"mean_sigma_base", o.mean_sigma_base},
                          {"mean_sigma_method", o.mean_sigma_method},
                          {"top_bucket_delta", o.top_bucket_delta},
                          {"bottom_bucket_delta", o.bottom_bucket_delta}});
    json trend_json = {{"rule", trend.method_rule}, {"per_seed", per_seed}};
    write_file(out_dir + "/trend.json", trend_json.dump(2) + "\n");
  }
  echo_config(config, out_dir);
}

int cmd_verify(const json& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  const auto& v = config.at("verify");
  VerifyOptions opt;
  opt.seed = config.at("seed").get<std::uint64_t>();
  if (opt.seed == 0) opt.seed = 20250805;
  opt.kl_cases = v.at("cases_kl").get<int>();
  opt.chi2_cases = v.at("cases_chi2").get<int>();
  opt.lambda_rho_cases = v.at("cases_lambda_rho").get<int>();
  opt.scorer_cases = v.at("cases_scorer").get<int>();
  opt.max_n = v.at("max_n").get<int>();
  opt.oracle_tol = v.at("oracle_tol").get<double>();
  const auto suites = run_all_verifications(opt);
  json out = json::array();
  int violations = 0;
  for (const auto& suite : suites) {
    violations += suite.failures;
    out.push_back({{"name", suite.name},
                   {"cases", suite.cases},
                   {"failures", suite.failures},
                   {"skipped", suite.skipped},
                   {"max_error", suite.max_error},
                   {"notes", suite.notes}});
  }
  json report = {{"ok", violations == 0}, {"suites", out}};
  write_file(out_dir + "/verify.json", report.dump(2) + "\n");
  echo_config(config, out_dir);
  return violations;
}

}  // namespace riskrank::run
