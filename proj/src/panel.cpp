#include "riskrank/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "riskrank/errors.hpp"

namespace riskrank {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quantile_lower(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  int k = static_cast<int>(std::ceil(q * static_cast<double>(n) - 1e-9));
  k = std::clamp(k, 1, n);
  return values[static_cast<std::size_t>(k - 1)];
}

}  // namespace

NormalizedScorer normalize_pool(const CandidatePool& pool, const std::string& scorer, bool enabled) {
  if (pool.candidates.empty()) throw InputError("normalize_pool: empty pool");
  NormalizedScorer out;
  out.samples.reserve(pool.candidates.size());
  std::vector<const std::vector<double>*> raw;
  std::size_t total = 0;
  for (const auto& cand : pool.candidates) {
    const auto it = cand.samples.find(scorer);
    if (it == cand.samples.end())
      throw InputError("normalize_pool: candidate " + cand.id + " has no scorer " + scorer);
    raw.push_back(&it->second.values);
    total += it->second.values.size();
  }
  if (!enabled) {
    out.constants = {0.0, 1.0, false};
    for (const auto* values : raw) out.samples.push_back(SampleSet{*values});
    return out;
  }
  double sum = 0.0;
  for (const auto* values : raw) sum = std::accumulate(values->begin(), values->end(), sum);
  const double pooled_mean = sum / static_cast<double>(total);
  double ss = 0.0;
  for (const auto* values : raw)
    for (double v : *values) {
      const double d = v - pooled_mean;
      ss += d * d;
    }
  double pooled_std = total > 1 ? std::sqrt(ss / static_cast<double>(total - 1)) : 0.0;
  bool guarded = false;
  if (pooled_std == 0.0) {
    pooled_std = 1.0;
    guarded = true;
  }
  out.constants = {pooled_mean, pooled_std, guarded};
  for (const auto* values : raw) {
    SampleSet set;
    set.values.reserve(values->size());
    for (double v : *values) set.values.push_back((v - pooled_mean) / pooled_std);
    out.samples.push_back(std::move(set));
  }
  return out;
}

double aggregate_values(std::span<const double> values, double gamma) {
  if (values.empty()) throw ConfigError("aggregate_values: need at least one scorer value");
  if (!(gamma > 0.0)) throw ConfigError("aggregate_values: gamma must be positive");
  const double v_min = *std::min_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp(-gamma * (v - v_min));
  return -(std::log(acc / static_cast<double>(values.size())) - gamma * v_min) / gamma;
}

OracleResult scorer_dro_oracle(std::span<const double> values, double gamma, int budget) {
  if (values.empty()) throw ConfigError("scorer_dro_oracle: empty value vector");
  if (!(gamma > 0.0)) throw ConfigError("scorer_dro_oracle: gamma must be positive");
  if (static_cast<int>(values.size()) > kScorerOracleMaxM)
    throw ConfigError("scorer_dro_oracle supports M <= " + std::to_string(kScorerOracleMaxM));
  // Same variational problem as the KL oracle over sample atoms.
  return kl_dro_oracle(values, gamma, budget);
}

ScorerPanel build_panel(const CandidatePool& pool, std::span<const std::string> scorers,
                        double beta, double gamma, bool normalize) {
  if (scorers.empty()) throw ConfigError("build_panel: need at least one scorer");
  if (!(beta > 0.0)) throw ConfigError("build_panel: beta must be positive");
  if (!(gamma > 0.0)) throw ConfigError("build_panel: gamma must be positive");
  const std::size_t k = pool.candidates.size();
  ScorerPanel panel;
  panel.beta = beta;
  panel.gamma = gamma;
  panel.normalized = normalize;
  panel.entries.resize(k);
  for (auto& entry : panel.entries) entry.per_scorer.reserve(scorers.size());

  for (const auto& scorer : scorers) {
    NormalizedScorer ns = normalize_pool(pool, scorer, normalize);
    panel.constants.push_back(ns.constants);
    for (std::size_t i = 0; i < k; ++i) {
      RiskProfile profile;
      profile.stats = sample_stats(ns.samples[i].values);
      profile.entropic_value = entropic_value(ns.samples[i].values, beta);
      profile.risk_premium = profile.stats.mean - profile.entropic_value;
      panel.entries[i].per_scorer.push_back(std::move(profile));
    }
  }

  std::vector<double> v(scorers.size());
  for (std::size_t i = 0; i < k; ++i) {
    auto& entry = panel.entries[i];
    double rp_max = -kInf;
    double sigma_max = -kInf;
    double mu_sum = 0.0;
    for (std::size_t m = 0; m < entry.per_scorer.size(); ++m) {
      const auto& p = entry.per_scorer[m];
      v[m] = p.entropic_value;
      rp_max = std::max(rp_max, p.risk_premium);
      sigma_max = std::max(sigma_max, p.stats.std_dev);
      mu_sum += p.stats.mean;
    }
    entry.value_agg = aggregate_values(v, gamma);
    entry.rp_max = rp_max;
    entry.sigma_max = sigma_max;
    entry.mu_mean = mu_sum / static_cast<double>(entry.per_scorer.size());
  }
  return panel;
}

SelectionResult select_panel(const CandidatePool& pool, const ScorerPanel& panel, PanelRule rule,
                             const PanelKnobs& knobs) {
  const std::size_t k = panel.entries.size();
  if (k == 0 || k != pool.candidates.size())
    throw InputError("select_panel: panel does not match pool");
  SelectionResult r;
  r.prompt_id = pool.prompt_id;
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < k; ++i) scores[i] = panel.entries[i].value_agg;

  std::size_t winner = 0;
  int feasible_count = static_cast<int>(k);
  bool fallback = false;
  switch (rule) {
    case PanelRule::Entropic: {
      r.rule = "panel-entropic";
      for (std::size_t i = 1; i < k; ++i)
        if (scores[i] > scores[winner]) winner = i;
      break;
    }
    case PanelRule::Tau: {
      r.rule = "panel-tau";
      double tau;
      if (knobs.tau) {
        tau = *knobs.tau;
      } else if (knobs.tau_quantile) {
        if (!(*knobs.tau_quantile > 0.0 && *knobs.tau_quantile < 1.0))
          throw ConfigError("panel tau_quantile must lie in (0,1)");
        std::vector<double> rps(k);
        for (std::size_t i = 0; i < k; ++i) rps[i] = panel.entries[i].rp_max;
        tau = quantile_lower(std::move(rps), *knobs.tau_quantile);
      } else {
        throw ConfigError("panel tau rule requires tau or tau_quantile");
      }
      std::vector<std::size_t> feasible;
      for (std::size_t i = 0; i < k; ++i)
        if (panel.entries[i].rp_max <= tau) feasible.push_back(i);
      if (feasible.empty()) {
        fallback = true;
        feasible.resize(k);
        std::iota(feasible.begin(), feasible.end(), std::size_t{0});
        feasible_count = 0;
      } else {
        feasible_count = static_cast<int>(feasible.size());
      }
      winner = feasible[0];
      for (std::size_t i : feasible)
        if (scores[i] > scores[winner]) winner = i;
      break;
    }
    case PanelRule::Eps: {
      r.rule = "panel-eps";
      if (!knobs.epsilon || !(*knobs.epsilon >= 0.0))
        throw ConfigError("panel eps rule requires epsilon >= 0");
      double v_max = -kInf;
      for (double s : scores) v_max = std::max(v_max, s);
      std::vector<std::size_t> feasible;
      for (std::size_t i = 0; i < k; ++i)
        if (scores[i] >= v_max - *knobs.epsilon) feasible.push_back(i);
      feasible_count = static_cast<int>(feasible.size());
      winner = feasible[0];
      for (std::size_t i : feasible) {
        const auto& cur = panel.entries[i];
        const auto& best = panel.entries[winner];
        if (cur.sigma_max < best.sigma_max ||
            (cur.sigma_max == best.sigma_max && cur.mu_mean > best.mu_mean))
          winner = i;
      }
      break;
    }
  }
  r.candidate_id = pool.candidates[winner].id;
  r.objective_value = scores[winner];
  r.feasible_count = feasible_count;
  r.fallback = fallback;
  r.scores.reserve(k);
  for (std::size_t i = 0; i < k; ++i) r.scores.emplace_back(pool.candidates[i].id, scores[i]);
  return r;
}

}  // namespace riskrank
