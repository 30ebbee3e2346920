#include "riskrank/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "riskrank/errors.hpp"
#include "riskrank/rng.hpp"

namespace riskrank {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

struct TruncMoments {
  double mean = 0.0;
  double var = 0.0;
};

// Mean/variance of a Gaussian(m, sd) conditioned on [lo, hi].
TruncMoments truncated_normal_moments(double m, double sd, double lo, double hi) {
  TruncMoments out;
  if (sd == 0.0) {
    if (m < lo || m > hi) throw ConfigError("simulator: degenerate mixture, group mean outside bounds");
    out.mean = m;
    out.var = 0.0;
    return out;
  }
  const double a = (lo - m) / sd;
  const double b = (hi - m) / sd;
  const double z = norm_cdf(b) - norm_cdf(a);
  if (z <= 1e-12) throw ConfigError("simulator: degenerate mixture, all mass outside bounds");
  const double pa = norm_pdf(a);
  const double pb = norm_pdf(b);
  out.mean = m + sd * (pa - pb) / z;
  const double t = (a * pa - b * pb) / z;
  const double u = (pa - pb) / z;
  out.var = sd * sd * (1.0 + t - u * u);
  if (out.var < 0.0) out.var = 0.0;
  return out;
}

struct CandidateLaw {
  std::vector<double> group_means;
  std::vector<double> group_weights;
  std::vector<double> group_stds;
  double true_mean = 0.0;
  double true_std = 0.0;
};

CandidateLaw make_law(const ScenarioConfig& cfg, double base, double gap) {
  CandidateLaw law;
  const std::size_t g = cfg.groups.size();
  for (std::size_t i = 0; i < g; ++i) {
    const double offset = g == 1 ? 0.0 : (static_cast<double>(i) / static_cast<double>(g - 1)) - 0.5;
    law.group_means.push_back(base + gap * offset);
    law.group_weights.push_back(cfg.groups[i].weight);
    law.group_stds.push_back(cfg.groups[i].noise_std);
  }
  double mean = 0.0, second = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const TruncMoments tm = truncated_normal_moments(law.group_means[i], law.group_stds[i],
                                                     cfg.bounds.lo, cfg.bounds.hi);
    mean += law.group_weights[i] * tm.mean;
    second += law.group_weights[i] * (tm.var + tm.mean * tm.mean);
  }
  law.true_mean = mean;
  law.true_std = std::sqrt(std::max(0.0, second - mean * mean));
  return law;
}

double draw_sample(const CandidateLaw& law, Bounds bounds, Rng& rng) {
  // group index
  const double u = rng.next_double();
  std::size_t g = 0;
  double acc = 0.0;
  for (; g + 1 < law.group_weights.size(); ++g) {
    acc += law.group_weights[g];
    if (u < acc) break;
  }
  const double m = law.group_means[g];
  const double sd = law.group_stds[g];
  if (sd == 0.0) return m;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double v = m + sd * rng.normal();
    if (v >= bounds.lo && v <= bounds.hi) return v;
  }
  throw ConfigError("simulator: rejection sampling failed, group mass outside bounds");
}

std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

struct GeneratedPool {
  CandidatePool pool;
  std::vector<CandidateLaw> laws;
  bool high = false;
};

GeneratedPool generate_pool(const ScenarioConfig& cfg, std::uint64_t master_seed,
                            const std::string& prompt_id) {
  Rng rng = derive_stream(master_seed, prompt_id);
  GeneratedPool out;
  out.pool.prompt_id = prompt_id;
  out.high = rng.next_double() < cfg.high_fraction;
  const double gap = out.high ? cfg.high_gap : cfg.low_gap;
  const double span = cfg.bounds.hi - cfg.bounds.lo;
  const double lo = cfg.bounds.lo + cfg.base_lo_frac * span;
  const double hi = cfg.bounds.lo + cfg.base_hi_frac * span;
  for (int k = 0; k < cfg.candidates_per_prompt; ++k) {
    const double base = rng.uniform(lo, hi);
    CandidateLaw law = make_law(cfg, base, gap);
    Candidate cand;
    cand.id = "c" + zero_pad(k, 2);
    SampleSet sel, eval;
    for (int i = 0; i < cfg.samples_per_candidate; ++i)
      sel.values.push_back(draw_sample(law, cfg.bounds, rng));
    for (int i = 0; i < cfg.eval_samples_per_candidate; ++i)
      eval.values.push_back(draw_sample(law, cfg.bounds, rng));
    cand.samples["sim"] = std::move(sel);
    if (cfg.eval_samples_per_candidate > 0) cand.eval_samples["sim"] = std::move(eval);
    out.pool.candidates.push_back(std::move(cand));
    out.laws.push_back(std::move(law));
  }
  return out;
}

// Shrinks the requested (mean shift, std scale) until the transformed
// samples stay inside bounds; the identity transform always qualifies.
void perturb_samples(std::vector<double>& values, double d_mu, double sigma_target_delta,
                     Bounds bounds) {
  if (d_mu == 0.0 && sigma_target_delta == 0.0) return;
  const SampleStats stats = sample_stats(values);
  double scale_delta = stats.std_dev > 0.0 ? sigma_target_delta / stats.std_dev : 0.0;
  double shift = d_mu;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double scale = 1.0 + scale_delta;
    bool ok = true;
    for (double v : values) {
      const double w = stats.mean + shift + (v - stats.mean) * scale;
      if (w < bounds.lo || w > bounds.hi) {
        ok = false;
        break;
      }
    }
    if (ok) {
      for (double& v : values) v = stats.mean + shift + (v - stats.mean) * scale;
      return;
    }
    shift *= 0.5;
    scale_delta *= 0.5;
  }
  // fall through: leave samples unchanged
}

}  // namespace

void ScenarioConfig::validate() const {
  if (num_prompts < 1) throw ConfigError("scenario: num_prompts must be >= 1");
  if (candidates_per_prompt < 1) throw ConfigError("scenario: candidates_per_prompt must be >= 1");
  if (samples_per_candidate < 1) throw ConfigError("scenario: samples_per_candidate must be >= 1");
  if (eval_samples_per_candidate < 0)
    throw ConfigError("scenario: eval_samples_per_candidate must be >= 0");
  if (!(bounds.lo < bounds.hi)) throw ConfigError("scenario: bounds must satisfy lo < hi");
  if (groups.empty()) throw ConfigError("scenario: need at least one rater group");
  double w = 0.0;
  for (const auto& g : groups) {
    if (!(g.weight > 0.0)) throw ConfigError("scenario: group weights must be positive");
    if (!(g.noise_std >= 0.0)) throw ConfigError("scenario: group noise must be >= 0");
    w += g.weight;
  }
  if (std::abs(w - 1.0) > 1e-9) throw ConfigError("scenario: group weights must sum to 1");
  if (!(high_fraction >= 0.0 && high_fraction <= 1.0))
    throw ConfigError("scenario: high_fraction must lie in [0,1]");
  if (!(high_gap >= 0.0 && low_gap >= 0.0)) throw ConfigError("scenario: gaps must be >= 0");
  if (!(base_lo_frac >= 0.0 && base_hi_frac <= 1.0 && base_lo_frac <= base_hi_frac))
    throw ConfigError("scenario: base band fractions must satisfy 0 <= lo <= hi <= 1");
  if (!(proxy_bias_mu >= 0.0 && proxy_noise_sigma >= 0.0))
    throw ConfigError("scenario: proxy perturbation magnitudes must be >= 0");
  // Group means must stay inside bounds at both band ends.
  const double span = bounds.hi - bounds.lo;
  const double gap = std::max(high_gap, low_gap);
  const double lo_mean = bounds.lo + base_lo_frac * span - gap / 2.0;
  const double hi_mean = bounds.lo + base_hi_frac * span + gap / 2.0;
  if (groups.size() > 1 && (lo_mean < bounds.lo - 1e-9 || hi_mean > bounds.hi + 1e-9))
    throw ConfigError("scenario: degenerate mixture, group means can leave the bounds");
}

GeneratedCorpus generate_corpus(const ScenarioConfig& cfg) {
  cfg.validate();
  GeneratedCorpus out;
  out.corpus.bounds = cfg.bounds;
  out.corpus.scorer_ids = {"sim"};
  out.corpus.meta.n_aug = std::max(0, cfg.samples_per_candidate - 1);
  const int width = cfg.num_prompts > 10000 ? 6 : 4;
  for (int p = 0; p < cfg.num_prompts; ++p) {
    const std::string prompt_id = "p" + zero_pad(p, width);
    GeneratedPool gp = generate_pool(cfg, cfg.seed, prompt_id);
    for (std::size_t k = 0; k < gp.laws.size(); ++k) {
      out.truth.push_back({prompt_id, gp.pool.candidates[k].id, gp.laws[k].true_mean,
                           gp.laws[k].true_std});
    }
    out.corpus.pools.push_back(std::move(gp.pool));
  }
  return out;
}

void write_truth_file(std::span<const TruthEntry> truth, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open output file: " + path);
  for (const auto& t : truth) {
    out << "{\"prompt_id\":\"" << t.prompt_id << "\",\"candidate_id\":\"" << t.candidate_id
        << "\",\"true_mean\":" << format_double(t.true_mean)
        << ",\"true_std\":" << format_double(t.true_std) << "}\n";
  }
}

namespace {

CoverageResult run_coverage(const ScenarioConfig& cfg, const RiskConfig& risk, int trials,
                            bool proxy) {
  cfg.validate();
  risk.validate();
  if (trials < 0) throw ConfigError("coverage: trials must be >= 0");
  if (cfg.samples_per_candidate < 2) throw ConfigError("coverage: needs n >= 2 for the LCB");
  if (proxy && !risk.proxy_eps) throw ConfigError("proxy coverage: risk.proxy_eps must be set");
  CoverageResult result;
  result.trials = trials;
  if (trials == 0) {
    result.no_trials = true;
    return result;
  }
  const int k = cfg.candidates_per_prompt;
  const double slack = proxy ? proxy_slack(risk, k, cfg.samples_per_candidate) : 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng trial_rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(t));
    const std::string trial_id = "t" + std::to_string(t);
    GeneratedPool gp = generate_pool(cfg, cfg.seed ^ 0x9e3779b97f4a7c15ULL,
                                     trial_id);
    bool all_covered = true;
    for (int c = 0; c < k && all_covered; ++c) {
      std::vector<double> values = gp.pool.candidates[static_cast<std::size_t>(c)]
                                       .samples.at("sim")
                                       .values;
      if (proxy) {
        const auto [eps_mu, eps_sigma] = *risk.proxy_eps;
        const double d_mu = eps_mu * (2.0 * trial_rng.next_double() - 1.0);
        const double d_sigma = eps_sigma * (2.0 * trial_rng.next_double() - 1.0);
        perturb_samples(values, d_mu, d_sigma, cfg.bounds);
      }
      const double lcb = lcb_bounded(sample_stats(values), k, risk, cfg.bounds) - slack;
      // 1e-9 floor absorbs last-ulp rounding when the penalty is zero
      if (gp.laws[static_cast<std::size_t>(c)].true_mean < lcb - 1e-9) all_covered = false;
    }
    if (all_covered) ++result.covered;
  }
  result.rate = static_cast<double>(result.covered) / static_cast<double>(trials);
  return result;
}

}  // namespace

CoverageResult coverage_experiment(const ScenarioConfig& cfg, const RiskConfig& risk, int trials) {
  return run_coverage(cfg, risk, trials, false);
}

CoverageResult proxy_coverage_experiment(const ScenarioConfig& cfg, const RiskConfig& risk,
                                         int trials) {
  return run_coverage(cfg, risk, trials, true);
}

Corpus proxy_perturb(const Corpus& corpus, double eps_mu, double eps_sigma, std::uint64_t seed,
                     PerturbReport* report) {
  if (!(eps_mu >= 0.0 && eps_sigma >= 0.0))
    throw ConfigError("proxy_perturb: eps magnitudes must be >= 0");
  Corpus out = corpus;
  PerturbReport local;
  for (auto& pool : out.pools) {
    Rng rng = derive_stream(seed, pool.prompt_id);
    for (auto& cand : pool.candidates) {
      for (auto& [scorer, set] : cand.samples) {
        const SampleStats before = sample_stats(set.values);
        const double d_mu = eps_mu * (2.0 * rng.next_double() - 1.0);
        const double d_sigma = eps_sigma * (2.0 * rng.next_double() - 1.0);
        perturb_samples(set.values, d_mu, d_sigma, corpus.bounds);
        const SampleStats after = sample_stats(set.values);
        local.realized_mu_max = std::max(local.realized_mu_max, std::abs(after.mean - before.mean));
        local.realized_sigma_max =
            std::max(local.realized_sigma_max, std::abs(after.std_dev - before.std_dev));
      }
    }
  }
  if (report) *report = local;
  return out;
}

TrendResult trend_experiment(const ScenarioConfig& cfg, const DecoderConfig& method,
                             const EvalConfig& eval_cfg, std::span<const std::uint64_t> seeds) {
  cfg.validate();
  method.validate();
  eval_cfg.validate();
  if (seeds.empty()) throw ConfigError("trend: need at least one seed");
  if (cfg.num_prompts < eval_cfg.bucket_count)
    throw ConfigError("trend: fewer prompts than buckets");
  if (cfg.eval_samples_per_candidate < 1)
    throw ConfigError("trend: eval samples required");

  DecoderConfig base_cfg;
  base_cfg.rule = Rule::Mean;

  TrendResult result;
  result.method_rule = rule_name(method.rule);
  std::map<std::string, double> pooled_delta, pooled_key;
  std::map<std::string, double> pooled_z_base, pooled_z_method;

  for (std::uint64_t seed : seeds) {
    ScenarioConfig seeded = cfg;
    seeded.seed = seed;
    GeneratedCorpus gen = generate_corpus(seeded);
    TrendSeedOutcome outcome;
    outcome.seed = seed;
    double sigma_base_acc = 0.0, sigma_method_acc = 0.0;
    std::map<std::string, double> delta_by_prompt, key_by_prompt;
    for (const auto& pool : gen.corpus.pools) {
      SplitView view = split_select_eval(pool, SplitPolicy{SplitPolicy::Mode::EvalField, 0.5});
      const SelectionResult base_sel = select(view.selection, "sim", base_cfg, cfg.bounds);
      const SelectionResult method_sel = select(view.selection, "sim", method, cfg.bounds);
      const auto find_index = [&](const std::string& id) {
        for (std::size_t i = 0; i < pool.candidates.size(); ++i)
          if (pool.candidates[i].id == id) return i;
        throw InputError("trend: candidate lookup failed");
      };
      const std::size_t bi = find_index(base_sel.candidate_id);
      const std::size_t mi = find_index(method_sel.candidate_id);
      const double sigma_base =
          sample_stats(view.selection.candidates[bi].samples.at("sim").values).std_dev;
      const double sigma_method =
          sample_stats(view.selection.candidates[mi].samples.at("sim").values).std_dev;
      const double z_base = sample_stats(view.evaluation.candidates[bi].samples.at("sim").values).mean;
      const double z_method =
          sample_stats(view.evaluation.candidates[mi].samples.at("sim").values).mean;
      sigma_base_acc += sigma_base;
      sigma_method_acc += sigma_method;
      const double delta = tradeoff(z_method, sigma_method, eval_cfg.lambda_eval) -
                           tradeoff(z_base, sigma_base, eval_cfg.lambda_eval);
      const std::string key_id = "s" + std::to_string(seed) + ":" + pool.prompt_id;
      delta_by_prompt[key_id] = delta;
      key_by_prompt[key_id] = sigma_base;
      pooled_delta[key_id] = delta;
      pooled_key[key_id] = sigma_base;
      pooled_z_base[key_id] = z_base;
      pooled_z_method[key_id] = z_method;
    }
    const double n_prompts = static_cast<double>(gen.corpus.pools.size());
    outcome.mean_sigma_base = sigma_base_acc / n_prompts;
    outcome.mean_sigma_method = sigma_method_acc / n_prompts;
    const auto buckets = bucket_deltas(delta_by_prompt, key_by_prompt, eval_cfg.bucket_count);
    outcome.bottom_bucket_delta = buckets.front().mean;
    outcome.top_bucket_delta = buckets.back().mean;
    result.per_seed.push_back(outcome);
  }

  result.tradeoff_buckets = bucket_deltas(pooled_delta, pooled_key, eval_cfg.bucket_count);

  // Per-bucket delta of the prompt-level lower-tail mean.
  {
    std::vector<double> sorted_keys;
    sorted_keys.reserve(pooled_key.size());
    for (const auto& [id, k] : pooled_key) sorted_keys.push_back(k);
    std::sort(sorted_keys.begin(), sorted_keys.end());
    const int n = static_cast<int>(sorted_keys.size());
    std::vector<double> edges;
    for (int j = 1; j < eval_cfg.bucket_count; ++j) {
      const int kk = std::clamp(
          static_cast<int>(std::ceil(static_cast<double>(j) / eval_cfg.bucket_count * n - 1e-9)), 1, n);
      edges.push_back(sorted_keys[static_cast<std::size_t>(kk - 1)]);
    }
    std::vector<std::vector<double>> base_z(static_cast<std::size_t>(eval_cfg.bucket_count));
    std::vector<std::vector<double>> method_z(static_cast<std::size_t>(eval_cfg.bucket_count));
    for (const auto& [id, key] : pooled_key) {
      std::size_t b = 0;
      for (double e : edges)
        if (key > e) ++b;
      base_z[b].push_back(pooled_z_base.at(id));
      method_z[b].push_back(pooled_z_method.at(id));
    }
    for (int b = 0; b < eval_cfg.bucket_count; ++b) {
      BucketRow row;
      row.bucket = b + 1;
      row.count = static_cast<int>(base_z[static_cast<std::size_t>(b)].size());
      if (row.count > 0) {
        row.mean = cvar_over_prompts(method_z[static_cast<std::size_t>(b)], eval_cfg.cvar_alpha_prompts) -
                   cvar_over_prompts(base_z[static_cast<std::size_t>(b)], eval_cfg.cvar_alpha_prompts);
      }
      result.cvar_buckets.push_back(row);
    }
  }
  return result;
}

}  // namespace riskrank
