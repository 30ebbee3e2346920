#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskrank/corpus.hpp"
#include "riskrank/decoders.hpp"
#include "riskrank/risk.hpp"

namespace riskrank {

// Within-prompt pooled normalization constants for one scorer: mean and
// standard deviation over all K*n samples of the pool. Zero pooled spread
// sets pooled_std = 1 and the guard flag.
struct NormalizationConstants {
  double pooled_mean = 0.0;
  double pooled_std = 1.0;
  bool guarded = false;
};

struct NormalizedScorer {
  NormalizationConstants constants;
  std::vector<SampleSet> samples;  // per candidate, pool order
};

NormalizedScorer normalize_pool(const CandidatePool& pool, const std::string& scorer, bool enabled);

// Soft worst-case over scorers: -(1/gamma) * log( mean_m exp(-gamma * v_m) ).
double aggregate_values(std::span<const double> values, double gamma);

inline constexpr int kScorerOracleMaxM = 6;

// Verification-only: minimizes sum_m q_m v_m + (1/gamma) KL(q || uniform)
// over the simplex without touching the closed form.
OracleResult scorer_dro_oracle(std::span<const double> values, double gamma, int budget = 200);

struct PanelEntry {
  std::vector<RiskProfile> per_scorer;  // normalized-scale profiles, scorer order
  double value_agg = 0.0;               // soft worst-case of entropic values
  double rp_max = 0.0;                  // worst-case risk premium
  double sigma_max = 0.0;               // worst-case dispersion (normalized scale)
  double mu_mean = 0.0;                 // averaged mean
};

struct ScorerPanel {
  std::vector<PanelEntry> entries;                  // pool order
  std::vector<NormalizationConstants> constants;    // scorer order
  double beta = 1.0;
  double gamma = 1.0;
  bool normalized = true;
};

ScorerPanel build_panel(const CandidatePool& pool, std::span<const std::string> scorers,
                        double beta, double gamma, bool normalize);

enum class PanelRule { Entropic, Tau, Eps };

struct PanelKnobs {
  std::optional<double> tau;
  std::optional<double> tau_quantile;
  std::optional<double> epsilon;
};

// Entropic: argmax aggregated value. Tau: same under rp_max <= tau with
// full-pool fallback. Eps: min sigma_max within the near-optimal set,
// ties by larger mu_mean then index. Rule names serialize with a "panel-"
// prefix.
SelectionResult select_panel(const CandidatePool& pool, const ScorerPanel& panel, PanelRule rule,
                             const PanelKnobs& knobs);

}  // namespace riskrank
