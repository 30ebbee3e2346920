#include "riskrank/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "riskrank/errors.hpp"
#include "riskrank/rng.hpp"

namespace riskrank {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ScoredCandidate {
  SampleStats stats;
  double entropic = 0.0;
  double rp = 0.0;
};

const std::vector<double>& samples_for(const Candidate& cand, const std::string& scorer) {
  const auto it = cand.samples.find(scorer);
  if (it == cand.samples.end())
    throw InputError("candidate " + cand.id + " has no samples under scorer " + scorer);
  return it->second.values;
}

// Lower empirical quantile: the smallest value with at least ceil(q*n)
// values at or below it.
double lower_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  int k = static_cast<int>(std::ceil(q * static_cast<double>(n) - 1e-9));
  k = std::clamp(k, 1, n);
  return values[static_cast<std::size_t>(k - 1)];
}

std::size_t argmax_lowest_index(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

SelectionResult make_result(const CandidatePool& pool, const DecoderConfig& cfg,
                            const std::vector<double>& scores, std::size_t winner,
                            int feasible_count, bool fallback) {
  SelectionResult r;
  r.prompt_id = pool.prompt_id;
  r.candidate_id = pool.candidates[winner].id;
  r.rule = rule_name(cfg.rule);
  r.objective_value = scores[winner];
  r.feasible_count = feasible_count;
  r.fallback = fallback;
  r.scores.reserve(pool.candidates.size());
  for (std::size_t i = 0; i < pool.candidates.size(); ++i)
    r.scores.emplace_back(pool.candidates[i].id, scores[i]);
  return r;
}

SelectionResult select_by_score(const CandidatePool& pool, const DecoderConfig& cfg,
                                const std::vector<double>& scores) {
  const std::size_t winner = argmax_lowest_index(scores);
  return make_result(pool, cfg, scores, winner, static_cast<int>(scores.size()), false);
}

SelectionResult select_tau(const CandidatePool& pool, const DecoderConfig& cfg,
                           const std::vector<ScoredCandidate>& scored) {
  double tau;
  if (cfg.tau) {
    tau = *cfg.tau;
  } else {
    std::vector<double> rps;
    rps.reserve(scored.size());
    for (const auto& s : scored) rps.push_back(s.rp);
    tau = lower_quantile(std::move(rps), *cfg.tau_quantile);
  }
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < scored.size(); ++i)
    if (scored[i].rp <= tau) feasible.push_back(i);
  bool fallback = false;
  if (feasible.empty()) {
    fallback = true;
    feasible.resize(scored.size());
    std::iota(feasible.begin(), feasible.end(), std::size_t{0});
  }
  const auto objective = [&](std::size_t i) {
    return cfg.tau_objective == TauObjective::Mean ? scored[i].stats.mean : scored[i].entropic;
  };
  std::size_t winner = feasible[0];
  for (std::size_t i : feasible)
    if (objective(i) > objective(winner)) winner = i;
  std::vector<double> scores(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) scores[i] = objective(i);
  return make_result(pool, cfg, scores, winner, static_cast<int>(fallback ? 0 : feasible.size()),
                     fallback);
}

SelectionResult select_eps(const CandidatePool& pool, const DecoderConfig& cfg,
                           const std::vector<ScoredCandidate>& scored) {
  double v_max = -kInf;
  for (const auto& s : scored) v_max = std::max(v_max, s.entropic);
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < scored.size(); ++i)
    if (scored[i].entropic >= v_max - *cfg.epsilon) feasible.push_back(i);
  std::size_t winner = feasible[0];
  for (std::size_t i : feasible) {
    const auto& cur = scored[i];
    const auto& best = scored[winner];
    if (cur.stats.std_dev < best.stats.std_dev ||
        (cur.stats.std_dev == best.stats.std_dev && cur.stats.mean > best.stats.mean))
      winner = i;
  }
  std::vector<double> scores(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) scores[i] = scored[i].entropic;
  auto r = make_result(pool, cfg, scores, winner, static_cast<int>(feasible.size()), false);
  r.objective_value = scored[winner].entropic;
  return r;
}

SelectionResult select_bop(const CandidatePool& pool, const DecoderConfig& cfg,
                           const std::vector<ScoredCandidate>& scored) {
  const std::size_t k = pool.candidates.size();
  Rng rng = derive_stream(cfg.seed, pool.prompt_id);
  int k_prime = rng.poisson(*cfg.poisson_lambda);
  k_prime = std::clamp(k_prime, 1, static_cast<int>(k));
  // Partial Fisher-Yates: the first k_prime slots form a uniform subset.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int i = 0; i < k_prime; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(k - static_cast<std::size_t>(i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
  }
  std::size_t winner = k;
  for (int i = 0; i < k_prime; ++i) {
    const std::size_t idx = order[static_cast<std::size_t>(i)];
    if (winner == k || scored[idx].stats.mean > scored[winner].stats.mean ||
        (scored[idx].stats.mean == scored[winner].stats.mean && idx < winner))
      winner = idx;
  }
  std::vector<double> scores(k, -kInf);
  for (int i = 0; i < k_prime; ++i) {
    const std::size_t idx = order[static_cast<std::size_t>(i)];
    scores[idx] = scored[idx].stats.mean;
  }
  return make_result(pool, cfg, scores, winner, k_prime, false);
}

}  // namespace

const char* rule_name(Rule rule) {
  switch (rule) {
    case Rule::Mean: return "mean";
    case Rule::CVaR: return "cvar";
    case Rule::Entropic: return "entropic";
    case Rule::Tau: return "tau";
    case Rule::Lambda: return "lambda";
    case Rule::Eps: return "eps";
    case Rule::LCB: return "lcb";
    case Rule::MeanDispersion: return "mean_dispersion";
    case Rule::MCDropout: return "mc_dropout";
    case Rule::RBoN: return "rbon";
    case Rule::BoP: return "bop";
    case Rule::Caution: return "caution";
  }
  throw ConfigError("unknown rule enum value");
}

Rule rule_from_name(const std::string& name) {
  static const std::vector<std::pair<std::string, Rule>> table = {
      {"mean", Rule::Mean},
      {"cvar", Rule::CVaR},
      {"entropic", Rule::Entropic},
      {"tau", Rule::Tau},
      {"lambda", Rule::Lambda},
      {"eps", Rule::Eps},
      {"lcb", Rule::LCB},
      {"mean_dispersion", Rule::MeanDispersion},
      {"mc_dropout", Rule::MCDropout},
      {"rbon", Rule::RBoN},
      {"bop", Rule::BoP},
      {"caution", Rule::Caution},
  };
  for (const auto& [n, r] : table)
    if (n == name) return r;
  throw ConfigError("unknown rule name: " + name);
}

void DecoderConfig::validate() const {
  risk.validate();
  const auto need_beta = [&] {
    if (!(beta > 0.0)) throw ConfigError(std::string(rule_name(rule)) + " requires beta > 0");
  };
  switch (rule) {
    case Rule::Mean:
      break;
    case Rule::CVaR:
      break;  // cvar_alpha validated with risk
    case Rule::Entropic:
      need_beta();
      break;
    case Rule::Tau:
      need_beta();
      if (!tau && !tau_quantile) throw ConfigError("tau rule requires tau or tau_quantile");
      if (tau_quantile && !(*tau_quantile > 0.0 && *tau_quantile < 1.0))
        throw ConfigError("tau_quantile must lie in (0,1)");
      break;
    case Rule::Lambda:
      need_beta();
      if (!lambda_pen) throw ConfigError("lambda rule requires lambda_pen");
      if (!(*lambda_pen >= 0.0)) throw ConfigError("lambda_pen must be >= 0");
      break;
    case Rule::Eps:
      need_beta();
      if (!epsilon) throw ConfigError("eps rule requires epsilon");
      if (!(*epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
      break;
    case Rule::LCB:
      break;  // delta/alpha_scale validated with risk
    case Rule::MeanDispersion:
      if (!lambda_md) throw ConfigError("mean_dispersion rule requires lambda_md");
      if (!(*lambda_md >= 0.0)) throw ConfigError("lambda_md must be >= 0");
      break;
    case Rule::MCDropout:
      if (!alpha_mc) throw ConfigError("mc_dropout rule requires alpha_mc");
      if (!(*alpha_mc >= 0.0)) throw ConfigError("alpha_mc must be >= 0");
      break;
    case Rule::RBoN:
      if (!beta_rbon) throw ConfigError("rbon rule requires beta_rbon");
      if (!(*beta_rbon >= 0.0)) throw ConfigError("beta_rbon must be >= 0");
      break;
    case Rule::BoP:
      if (!poisson_lambda) throw ConfigError("bop rule requires poisson_lambda");
      if (!(*poisson_lambda > 0.0)) throw ConfigError("poisson_lambda must be > 0");
      break;
    case Rule::Caution:
      if (!alpha_caution) throw ConfigError("caution rule requires alpha_caution");
      if (!(*alpha_caution >= 0.0)) throw ConfigError("alpha_caution must be >= 0");
      break;
  }
}

SelectionResult select(const CandidatePool& pool, const std::string& scorer,
                       const DecoderConfig& cfg, Bounds bounds) {
  cfg.validate();
  if (pool.candidates.empty()) throw InputError("cannot select from an empty pool");
  const std::size_t k = pool.candidates.size();

  std::vector<ScoredCandidate> scored(k);
  const bool needs_entropic = cfg.rule == Rule::Entropic || cfg.rule == Rule::Tau ||
                              cfg.rule == Rule::Lambda || cfg.rule == Rule::Eps;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& values = samples_for(pool.candidates[i], scorer);
    scored[i].stats = sample_stats(values);
    if (needs_entropic) {
      scored[i].entropic = entropic_value(values, cfg.beta);
      scored[i].rp = scored[i].stats.mean - scored[i].entropic;
    }
  }

  std::vector<double> scores(k);
  switch (cfg.rule) {
    case Rule::Mean:
      for (std::size_t i = 0; i < k; ++i) scores[i] = scored[i].stats.mean;
      return select_by_score(pool, cfg, scores);
    case Rule::CVaR:
      for (std::size_t i = 0; i < k; ++i)
        scores[i] = empirical_cvar(samples_for(pool.candidates[i], scorer), cfg.risk.cvar_alpha);
      return select_by_score(pool, cfg, scores);
    case Rule::Entropic:
      for (std::size_t i = 0; i < k; ++i) scores[i] = scored[i].entropic;
      return select_by_score(pool, cfg, scores);
    case Rule::Tau:
      return select_tau(pool, cfg, scored);
    case Rule::Lambda:
      for (std::size_t i = 0; i < k; ++i) scores[i] = scored[i].entropic - *cfg.lambda_pen * scored[i].rp;
      return select_by_score(pool, cfg, scores);
    case Rule::Eps:
      return select_eps(pool, cfg, scored);
    case Rule::LCB:
      for (std::size_t i = 0; i < k; ++i)
        scores[i] = lcb_bounded(scored[i].stats, static_cast<int>(k), cfg.risk, bounds);
      return select_by_score(pool, cfg, scores);
    case Rule::MeanDispersion:
      for (std::size_t i = 0; i < k; ++i)
        scores[i] = scored[i].stats.mean - *cfg.lambda_md * scored[i].stats.std_dev;
      return select_by_score(pool, cfg, scores);
    case Rule::MCDropout:
      for (std::size_t i = 0; i < k; ++i)
        scores[i] = scored[i].stats.mean - *cfg.alpha_mc * scored[i].stats.std_dev;
      return select_by_score(pool, cfg, scores);
    case Rule::RBoN:
      for (std::size_t i = 0; i < k; ++i) {
        const auto& cand = pool.candidates[i];
        if (!cand.ref_loglik_per_token)
          throw InputError("rbon rule: candidate " + cand.id + " missing ref_loglik_per_token");
        scores[i] = scored[i].stats.mean + *cfg.beta_rbon * *cand.ref_loglik_per_token;
      }
      return select_by_score(pool, cfg, scores);
    case Rule::BoP:
      return select_bop(pool, cfg, scored);
    case Rule::Caution:
      for (std::size_t i = 0; i < k; ++i) {
        const auto& cand = pool.candidates[i];
        if (!cand.error_score)
          throw InputError("caution rule: candidate " + cand.id + " missing error_score");
        scores[i] = scored[i].stats.mean - *cfg.alpha_caution * *cand.error_score;
      }
      return select_by_score(pool, cfg, scores);
  }
  throw ConfigError("unknown rule enum value");
}

std::string selection_to_jsonl(const SelectionResult& r) {
  std::ostringstream out;
  const auto quote = [](const std::string& s) { return nlohmann::json(s).dump(); };
  out << "{\"prompt_id\":" << quote(r.prompt_id) << ",\"rule\":" << quote(r.rule)
      << ",\"candidate_id\":" << quote(r.candidate_id)
      << ",\"fallback\":" << (r.fallback ? "true" : "false") << ",\"scores\":{";
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    if (i) out << ',';
    const double v = r.scores[i].second;
    out << quote(r.scores[i].first) << ':'
        << (std::isfinite(v) ? format_double(v) : std::string("null"));
  }
  out << "}}";
  return out.str();
}

}  // namespace riskrank
