// Acceptance suite: runs every release criterion at its pinned tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "riskrank/decoders.hpp"
#include "riskrank/metrics.hpp"
#include "riskrank/rng.hpp"
#include "riskrank/simulator.hpp"
#include "riskrank/verify.hpp"

using namespace riskrank;

namespace {

int g_failures = 0;

void report(int number, const char* label, bool ok, const std::string& detail) {
  std::printf("%s  criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", number, label, detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

CandidatePool random_pool(Rng& rng, int k, int n, bool with_sidecars) {
  CandidatePool pool;
  pool.prompt_id = "p";
  for (int i = 0; i < k; ++i) {
    Candidate cand;
    cand.id = "c" + std::to_string(i);
    SampleSet set;
    for (int j = 0; j < n; ++j) set.values.push_back(rng.uniform(-10, 10));
    cand.samples["rm"] = std::move(set);
    if (with_sidecars) {
      cand.ref_loglik_per_token = rng.uniform(-5.0, 0.0);
      cand.error_score = rng.next_double();
    }
    pool.candidates.push_back(std::move(cand));
  }
  return pool;
}

DecoderConfig base_config(Rule rule) {
  DecoderConfig cfg;
  cfg.rule = rule;
  cfg.beta = 1.0;
  cfg.seed = 7;
  return cfg;
}

// 1. closed-form entropic value vs the simplex descent oracle
void criterion_kl() {
  const auto start = std::chrono::steady_clock::now();
  VerifyOptions opt;
  opt.kl_cases = 1000;
  const auto suite = verify_kl_equivalence(opt);
  const double elapsed = seconds_since(start);
  const bool ok = suite.failures == 0 && suite.skipped == 0 && suite.cases == 1000 &&
                  suite.max_error <= 1e-6 && elapsed < 10.0;
  report(1, "KL-robust value equals the entropic closed form (1000 cases, 1e-6)", ok,
         fmt("max err %.2e, %.2f s", suite.max_error, elapsed));
}

// 2. chi-square robust mean: tight match / conservative bound vs grid oracle
void criterion_chi2() {
  const auto start = std::chrono::steady_clock::now();
  VerifyOptions opt;
  opt.chi2_cases = 300;
  const auto suite = verify_chi2(opt);
  const double elapsed = seconds_since(start);
  const bool ok = suite.failures == 0 && suite.max_error <= 1e-6 && elapsed < 10.0;
  report(2, "chi-square robust mean matches / lower-bounds its oracle (1e-6)", ok,
         fmt("max err %.2e, %.2f s", suite.max_error, elapsed));
}

// 3. lambda->rho radius calibration identity
void criterion_lambda_rho() {
  VerifyOptions opt;
  opt.lambda_rho_cases = 100;
  const auto suite = verify_lambda_rho(opt);
  const bool ok = suite.failures == 0 && suite.max_error <= 1e-12;
  report(3, "rho(lambda) radius reproduces mean - lambda*std (1e-12)", ok,
         fmt("max err %.2e", suite.max_error));
}

// 4. soft worst-case scorer aggregation vs its oracle + sandwich/monotonicity
void criterion_scorer_dro() {
  VerifyOptions opt;
  opt.scorer_cases = 1000;
  const auto suite = verify_scorer_dro(opt);
  const bool ok = suite.failures == 0 && suite.max_error <= 1e-6;
  report(4, "scorer aggregation equals its simplex oracle (1000 cases, 1e-6)", ok,
         fmt("max err %.2e", suite.max_error));
}

ScenarioConfig coverage_scenario() {
  ScenarioConfig cfg;
  cfg.num_prompts = 1;
  cfg.candidates_per_prompt = 16;
  cfg.samples_per_candidate = 5;
  cfg.eval_samples_per_candidate = 0;
  cfg.bounds = {0, 10};
  cfg.groups = {{0.5, 0.5}, {0.5, 0.5}};
  cfg.high_fraction = 0.25;
  cfg.high_gap = 5.0;
  cfg.seed = 20250805;
  return cfg;
}

// 5. joint LCB coverage at K=16, n=5, delta=0.1 over 10000 trials
void criterion_coverage() {
  const auto start = std::chrono::steady_clock::now();
  RiskConfig risk;
  risk.delta = 0.1;
  const auto result = coverage_experiment(coverage_scenario(), risk, 10000);
  const double elapsed = seconds_since(start);
  const bool ok = result.rate >= 0.90 && elapsed < 60.0;
  report(5, "joint LCB coverage >= 0.90 (K=16, n=5, 10000 trials)", ok,
         fmt("rate %.4f, %.1f s", result.rate, elapsed));
}

// 6. proxy-robust coverage: perturbed stats minus the slack still cover
void criterion_proxy_coverage() {
  RiskConfig risk;
  risk.delta = 0.1;
  risk.proxy_eps = {0.3, 0.2};
  const auto result = proxy_coverage_experiment(coverage_scenario(), risk, 10000);
  const bool ok = result.rate >= 0.90;
  report(6, "proxy-robust coverage >= 1 - delta under (0.3, 0.2) perturbations", ok,
         fmt("rate %.4f", result.rate));
}

// 7. tradeoff anchors at lambda = 1.99
void criterion_tradeoff_anchor() {
  const double a = tradeoff(7.56, 0.67, 1.99);
  const double b = tradeoff(8.08, 0.55, 1.99);
  const bool ok = std::abs(a - 6.22) <= 0.01 && std::abs(b - 6.98) <= 0.01;
  report(7, "tradeoff anchors (7.56,0.67)->6.22 and (8.08,0.55)->6.98 (+-0.01)", ok,
         fmt("got %.4f and %.4f", a, b));
}

// 8. hypergeometric tail anchor
void criterion_hypergeom() {
  const double p = hypergeom_tail(500, 100, 100, 64);
  const double log_gap = std::abs(std::log10(p) - std::log10(2.6e-29));
  report(8, "hypergeometric tail P(X>=64; 500,100,100) ~ 2.6e-29 (0.5 in log10)",
         log_gap <= 0.5, fmt("p = %.3e, log10 gap %.3f", p, log_gap));
}

// 9. decoder reductions collapse to their parents on 200 random pools
void criterion_reductions() {
  Rng rng(901);
  constexpr Bounds bounds{-10, 10};
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const int k = 2 + static_cast<int>(rng.below(7));
    const int n = 2 + static_cast<int>(rng.below(5));
    const auto pool = random_pool(rng, k, n, true);

    const auto mean_pick = select(pool, "rm", base_config(Rule::Mean), bounds).candidate_id;
    const auto entropic_pick = select(pool, "rm", base_config(Rule::Entropic), bounds).candidate_id;

    auto tau_cfg = base_config(Rule::Tau);
    tau_cfg.tau = std::numeric_limits<double>::infinity();
    if (select(pool, "rm", tau_cfg, bounds).candidate_id != entropic_pick) ++mismatches;

    auto lambda_cfg = base_config(Rule::Lambda);
    lambda_cfg.lambda_pen = 0.0;
    if (select(pool, "rm", lambda_cfg, bounds).candidate_id != entropic_pick) ++mismatches;

    auto md_cfg = base_config(Rule::MeanDispersion);
    md_cfg.lambda_md = 0.0;
    if (select(pool, "rm", md_cfg, bounds).candidate_id != mean_pick) ++mismatches;

    auto mc_cfg = base_config(Rule::MCDropout);
    mc_cfg.alpha_mc = 0.0;
    if (select(pool, "rm", mc_cfg, bounds).candidate_id != mean_pick) ++mismatches;

    auto rbon_cfg = base_config(Rule::RBoN);
    rbon_cfg.beta_rbon = 0.0;
    if (select(pool, "rm", rbon_cfg, bounds).candidate_id != mean_pick) ++mismatches;

    auto caution_cfg = base_config(Rule::Caution);
    caution_cfg.alpha_caution = 0.0;
    if (select(pool, "rm", caution_cfg, bounds).candidate_id != mean_pick) ++mismatches;

    auto eps_cfg = base_config(Rule::Eps);
    eps_cfg.epsilon = 0.0;
    const auto eps_pick = select(pool, "rm", eps_cfg, bounds).candidate_id;
    double v_max = -std::numeric_limits<double>::infinity();
    double v_eps = 0.0;
    for (const auto& cand : pool.candidates) {
      const double v = entropic_value(cand.samples.at("rm").values, 1.0);
      v_max = std::max(v_max, v);
      if (cand.id == eps_pick) v_eps = v;
    }
    if (v_eps != v_max) ++mismatches;
  }
  report(9, "knob-zero reductions equal their parent rules on 200 pools", mismatches == 0,
         fmt("%.0f mismatches", static_cast<double>(mismatches)));
}

// 10. eps selections are never dominated in (value, dispersion)
void criterion_eps_pareto() {
  Rng rng(1001);
  constexpr Bounds bounds{-10, 10};
  int dominated = 0;
  for (int i = 0; i < 200; ++i) {
    const int k = 2 + static_cast<int>(rng.below(7));
    const int n = 2 + static_cast<int>(rng.below(5));
    const auto pool = random_pool(rng, k, n, false);
    auto cfg = base_config(Rule::Eps);
    cfg.epsilon = rng.uniform(0.0, 2.0);
    const auto pick = select(pool, "rm", cfg, bounds).candidate_id;
    double v_star = 0.0, s_star = 0.0;
    std::vector<std::pair<double, double>> points;
    for (const auto& cand : pool.candidates) {
      const auto& values = cand.samples.at("rm").values;
      const double v = entropic_value(values, cfg.beta);
      const double s = sample_stats(values).std_dev;
      points.emplace_back(v, s);
      if (cand.id == pick) {
        v_star = v;
        s_star = s;
      }
    }
    for (const auto& [v, s] : points)
      if (v >= v_star && s <= s_star && (v > v_star || s < s_star)) {
        ++dominated;
        break;
      }
  }
  report(10, "eps rule is Pareto-undominated in (value, dispersion) on 200 pools",
         dominated == 0, fmt("%.0f dominated picks", static_cast<double>(dominated)));
}

// 11. translation equivariance of the entropic value / invariance of the premium
void criterion_translation() {
  Rng rng(1101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + static_cast<int>(rng.below(6));
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = rng.uniform(-10, 10);
    const double c = rng.uniform(-1000.0, 1000.0);
    std::vector<double> shifted = values;
    for (auto& v : shifted) v += c;
    const double dv = std::abs(entropic_value(shifted, 1.0) - entropic_value(values, 1.0) - c);
    const double drp = std::abs(risk_premium(shifted, 1.0) - risk_premium(values, 1.0));
    worst = std::max({worst, dv, drp});
  }
  report(11, "translation equivariance of value and premium (1e-9, |c| <= 1000)",
         worst <= 1e-9, fmt("max err %.2e", worst));
}

// 12. simulated two-group trend: eps lowers dispersion and gains concentrate
//     on high-disagreement prompts
void criterion_trend() {
  const auto start = std::chrono::steady_clock::now();
  ScenarioConfig scenario;
  scenario.num_prompts = 150;
  scenario.candidates_per_prompt = 16;
  scenario.samples_per_candidate = 5;
  scenario.eval_samples_per_candidate = 5;
  scenario.bounds = {0, 10};
  scenario.groups = {{0.5, 0.5}, {0.5, 0.5}};
  scenario.high_fraction = 0.25;
  scenario.high_gap = 5.0;

  DecoderConfig eps_cfg = base_config(Rule::Eps);
  eps_cfg.epsilon = 0.25;

  EvalConfig eval_cfg;
  eval_cfg.lambda_eval = 1.99;
  eval_cfg.bucket_count = 5;

  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  const auto trend = trend_experiment(scenario, eps_cfg, eval_cfg, seeds);

  int sigma_wins = 0, bucket_wins = 0;
  for (const auto& outcome : trend.per_seed) {
    if (outcome.mean_sigma_method < outcome.mean_sigma_base) ++sigma_wins;
    if (outcome.top_bucket_delta > outcome.bottom_bucket_delta) ++bucket_wins;
  }
  const double elapsed = seconds_since(start);
  const bool ok = sigma_wins >= 19 && bucket_wins >= 16 && elapsed < 120.0;
  report(12, "eps lowers dispersion (>=19/20 seeds) and top bucket beats bottom (>=16/20)",
         ok, fmt("sigma 19<=%.0f, buckets 16<=%.0f", static_cast<double>(sigma_wins),
                 static_cast<double>(bucket_wins)) +
                 fmt(", %.1f s", elapsed));
}

// 13. byte determinism of select and simulate across runs and parallelism
void criterion_determinism() {
  const std::string cli = RISKRANK_CLI_PATH;
  const auto tmp = std::filesystem::temp_directory_path() /
                   ("riskrank_accept_" + std::to_string(::getpid()));
  std::filesystem::remove_all(tmp);
  std::filesystem::create_directories(tmp);
  const auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  const auto slurp = [](const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };

  bool ok = true;
  std::string detail = "ok";
  const std::string sim_args = " --prompts 40 --k 8 --n 5 --n-eval 5 --seed 77 --coverage-trials 0";
  for (const char* tag : {"sim1", "sim2"})
    if (run("simulate --out " + (tmp / tag).string() + sim_args) != 0) {
      ok = false;
      detail = "simulate failed";
    }
  if (ok && slurp(tmp / "sim1/corpus.jsonl") != slurp(tmp / "sim2/corpus.jsonl")) {
    ok = false;
    detail = "simulate outputs differ";
  }
  if (ok && slurp(tmp / "sim1/ground_truth.jsonl") != slurp(tmp / "sim2/ground_truth.jsonl")) {
    ok = false;
    detail = "ground truth differs";
  }
  if (ok) {
    const std::string corpus = (tmp / "sim1/corpus.jsonl").string();
    const std::string select_args = " --input " + corpus +
                                    " --bound-lo 0 --bound-hi 10 --seed 123"
                                    " --rules mean,entropic,tau,eps,bop --tau-quantile 0.25"
                                    " --epsilon 0.25 --poisson-lambda 4";
    for (const auto& [tag, par] :
         std::vector<std::pair<std::string, std::string>>{{"sel_p1_a", "1"},
                                                          {"sel_p1_b", "1"},
                                                          {"sel_p8_a", "8"},
                                                          {"sel_p8_b", "8"}})
      if (run("select --out " + (tmp / tag).string() + select_args + " --parallelism " + par) != 0) {
        ok = false;
        detail = "select failed";
      }
    if (ok) {
      const std::string ref = slurp(tmp / "sel_p1_a/selections.jsonl");
      if (ref.empty()) {
        ok = false;
        detail = "empty selections";
      }
      for (const char* tag : {"sel_p1_b", "sel_p8_a", "sel_p8_b"})
        if (slurp(tmp / tag / "selections.jsonl") != ref) {
          ok = false;
          detail = std::string("mismatch at ") + tag;
        }
    }
  }
  report(13, "select and simulate are byte-identical across runs and parallelism {1,8}", ok,
         detail);
}

}  // namespace

int main() {
  criterion_kl();
  criterion_chi2();
  criterion_lambda_rho();
  criterion_scorer_dro();
  criterion_coverage();
  criterion_proxy_coverage();
  criterion_tradeoff_anchor();
  criterion_hypergeom();
  criterion_reductions();
  criterion_eps_pareto();
  criterion_translation();
  criterion_trend();
  criterion_determinism();
  if (g_failures == 0)
    std::printf("acceptance: all 13 criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  return g_failures;
}
