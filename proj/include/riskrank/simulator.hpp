#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskrank/corpus.hpp"
#include "riskrank/decoders.hpp"
#include "riskrank/metrics.hpp"
#include "riskrank/risk.hpp"

namespace riskrank {

// Synthetic heterogeneous-rater scenario. Each candidate's satisfaction law
// is a mixture of truncated Gaussians: group means sit at the candidate's
// base quality plus gap-scaled offsets, and samples are rejection-resampled
// into the bounds so the bounded-rewards assumption holds exactly.
struct GroupSpec {
  double weight = 0.5;
  double noise_std = 0.5;
};

struct ScenarioConfig {
  int num_prompts = 200;
  int candidates_per_prompt = 16;  // K
  int samples_per_candidate = 5;   // n (selection view)
  int eval_samples_per_candidate = 5;
  Bounds bounds{0.0, 10.0};
  std::vector<GroupSpec> groups{{0.5, 0.5}, {0.5, 0.5}};
  double high_fraction = 0.25;  // share of prompts with widened group gaps
  double high_gap = 5.0;        // group-mean spread on high-disagreement prompts
  double low_gap = 0.0;
  double base_lo_frac = 0.3;  // base-quality band inside the bounds
  double base_hi_frac = 0.7;
  double proxy_bias_mu = 0.0;     // maps to eps_mu
  double proxy_noise_sigma = 0.0; // maps to eps_sigma
  std::uint64_t seed = 0;

  void validate() const;
};

struct TruthEntry {
  std::string prompt_id;
  std::string candidate_id;
  double true_mean = 0.0;
  double true_std = 0.0;
};

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<TruthEntry> truth;
};

GeneratedCorpus generate_corpus(const ScenarioConfig& cfg);

void write_truth_file(std::span<const TruthEntry> truth, const std::string& path);

struct CoverageResult {
  int trials = 0;
  int covered = 0;
  double rate = 0.0;
  bool no_trials = false;
};

// Fraction of independently drawn pools where every candidate's true mean
// lies above its bounded LCB simultaneously.
CoverageResult coverage_experiment(const ScenarioConfig& cfg, const RiskConfig& risk, int trials);

// Same check with proxy-perturbed selection statistics and the proxy slack
// subtracted from each LCB. risk.proxy_eps must be set.
CoverageResult proxy_coverage_experiment(const ScenarioConfig& cfg, const RiskConfig& risk, int trials);

struct PerturbReport {
  double realized_mu_max = 0.0;
  double realized_sigma_max = 0.0;
};

// Applies a bounded mean shift and dispersion rescale to every selection
// sample set, keeping values inside corpus bounds; reports the largest
// realized |delta mean| and |delta std|.
Corpus proxy_perturb(const Corpus& corpus, double eps_mu, double eps_sigma, std::uint64_t seed,
                     PerturbReport* report = nullptr);

struct TrendSeedOutcome {
  std::uint64_t seed = 0;
  double mean_sigma_base = 0.0;     // mean selection-view std of base picks
  double mean_sigma_method = 0.0;
  double top_bucket_delta = 0.0;    // mean delta-tradeoff in the highest bucket
  double bottom_bucket_delta = 0.0;
};

struct TrendResult {
  std::string method_rule;
  std::vector<TrendSeedOutcome> per_seed;
  std::vector<BucketRow> tradeoff_buckets;  // pooled over seeds
  std::vector<BucketRow> cvar_buckets;      // per-bucket delta of prompt-level CVaR
};

// Runs `method` against a mean baseline over seeded corpora, buckets
// per-prompt tradeoff deltas by the baseline's disagreement proxy, and
// summarizes the per-seed outcomes used by the qualitative trend checks.
TrendResult trend_experiment(const ScenarioConfig& cfg, const DecoderConfig& method,
                             const EvalConfig& eval_cfg, std::span<const std::uint64_t> seeds);

}  // namespace riskrank
