#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskrank/corpus.hpp"
#include "riskrank/risk.hpp"

namespace riskrank {

enum class Rule {
  Mean,
  CVaR,
  Entropic,
  Tau,
  Lambda,
  Eps,
  LCB,
  MeanDispersion,
  MCDropout,
  RBoN,
  BoP,
  Caution,
};

enum class TauObjective { Entropic, Mean };

const char* rule_name(Rule rule);
Rule rule_from_name(const std::string& name);

struct DecoderConfig {
  Rule rule = Rule::Mean;
  double beta = 1.0;
  std::optional<double> tau;
  std::optional<double> tau_quantile;  // q_RP: tau set to this quantile of pool risk premia
  TauObjective tau_objective = TauObjective::Entropic;
  std::optional<double> lambda_pen;
  std::optional<double> epsilon;
  RiskConfig risk;  // delta/alpha_scale for LCB, cvar_alpha for CVaR
  std::optional<double> lambda_md;
  std::optional<double> alpha_mc;
  std::optional<double> beta_rbon;
  std::optional<double> poisson_lambda;
  std::optional<double> alpha_caution;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError when the rule's knobs are missing or invalid
};

struct SelectionResult {
  std::string prompt_id;
  std::string candidate_id;
  std::string rule;
  double objective_value = 0.0;
  int feasible_count = 0;
  bool fallback = false;
  // Per-candidate argmax scores in pool order.
  std::vector<std::pair<std::string, double>> scores;
};

// Applies one rule to the selection view of a pool under a single scorer.
// Deterministic given (pool, config); stochastic rules draw only from the
// stream derived from (config.seed, prompt_id). Ties resolve to the lowest
// candidate index; Eps first prefers the larger mean.
SelectionResult select(const CandidatePool& pool, const std::string& scorer,
                       const DecoderConfig& cfg, Bounds bounds);

std::string selection_to_jsonl(const SelectionResult& r);

}  // namespace riskrank
