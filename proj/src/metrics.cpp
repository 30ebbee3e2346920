#include "riskrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "riskrank/errors.hpp"
#include "riskrank/risk.hpp"

namespace riskrank {

namespace {

int ceil_count(double fraction, int n) {
  const int k = static_cast<int>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp(k, 1, n);
}

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Least squares of y on columns (with intercept prepended) via normal
// equations; throws on a singular system.
std::vector<double> residualize(std::span<const double> y,
                                const std::vector<std::vector<double>>& columns) {
  const std::size_t n = y.size();
  const std::size_t p = columns.size() + 1;
  std::vector<std::vector<double>> z(n, std::vector<double>(p, 1.0));
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) z[i][j + 1] = columns[j][i];
  // A = Z'Z, b = Z'y
  std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
  std::vector<double> b(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < p; ++r) {
      b[r] += z[i][r] * y[i];
      for (std::size_t c = 0; c < p; ++c) a[r][c] += z[i][r] * z[i][c];
    }
  }
  double scale = 0.0;
  for (std::size_t r = 0; r < p; ++r) scale = std::max(scale, std::abs(a[r][r]));
  // Gaussian elimination with partial pivoting.
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) <= 1e-12 * std::max(scale, 1.0))
      throw InputError("partial correlation: controls are collinear with the intercept");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < p; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < p; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> coef(p, 0.0);
  for (std::size_t r = p; r-- > 0;) {
    double acc = b[r];
    for (std::size_t c = r + 1; c < p; ++c) acc -= a[r][c] * coef[c];
    coef[r] = acc / a[r][r];
  }
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t c = 0; c < p; ++c) fit += z[i][c] * coef[c];
    residual[i] = y[i] - fit;
  }
  return residual;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_num(double v) { return format_double(v); }

}  // namespace

void EvalConfig::validate() const {
  if (!(cvar_alpha_prompts > 0.0 && cvar_alpha_prompts <= 1.0))
    throw ConfigError("eval config: cvar_alpha_prompts must lie in (0,1]");
  if (!(hv_fraction > 0.0 && hv_fraction <= 1.0))
    throw ConfigError("eval config: hv_fraction must lie in (0,1]");
  if (!(wtl_eps >= 0.0)) throw ConfigError("eval config: wtl_eps must be >= 0");
  if (bucket_count < 2) throw ConfigError("eval config: bucket_count must be >= 2");
  if (!(overlap_q > 0.0 && overlap_q <= 1.0))
    throw ConfigError("eval config: overlap_q must lie in (0,1]");
  if (base_rule.empty()) throw ConfigError("eval config: base_rule must be set");
}

double tradeoff(double mu_eval, double sigma_sel, double lambda_eval) {
  return mu_eval - lambda_eval * sigma_sel;
}

double cvar_over_prompts(std::span<const double> outcomes, double alpha) {
  if (outcomes.empty()) throw InputError("cvar_over_prompts: no outcomes");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("cvar_over_prompts: alpha must lie in (0,1]");
  const int k = ceil_count(alpha, static_cast<int>(outcomes.size()));
  std::vector<double> sorted(outcomes.begin(), outcomes.end());
  std::stable_sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.begin() + k, 0.0) / static_cast<double>(k);
}

WtlCounts wtl(std::span<const double> deltas, double eps) {
  if (!(eps >= 0.0)) throw ConfigError("wtl: eps must be >= 0");
  WtlCounts c;
  for (double d : deltas) {
    if (std::abs(d) <= eps)
      ++c.tie;
    else if (d > eps)
      ++c.win;
    else
      ++c.loss;
  }
  return c;
}

std::vector<std::string> hv_subset(const std::map<std::string, double>& base_sigma, double p) {
  if (base_sigma.empty()) throw InputError("hv_subset: no prompts");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("hv_subset: p must lie in (0,1]");
  std::vector<std::pair<std::string, double>> rows(base_sigma.begin(), base_sigma.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const int k = ceil_count(p, static_cast<int>(rows.size()));
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(rows[static_cast<std::size_t>(i)].first);
  return out;
}

double disagreement_summary_D(const CandidatePool& pool, const std::string& scorer) {
  if (pool.candidates.empty()) throw InputError("disagreement_summary_D: empty pool");
  double d = 0.0;
  bool first = true;
  for (const auto& cand : pool.candidates) {
    const auto it = cand.samples.find(scorer);
    if (it == cand.samples.end())
      throw InputError("disagreement_summary_D: candidate " + cand.id + " missing scorer " + scorer);
    const SampleStats s = sample_stats(it->second.values);
    const double var = s.std_dev * s.std_dev;
    if (first || var > d) d = var;
    first = false;
  }
  return d;
}

std::vector<BucketRow> bucket_deltas(const std::map<std::string, double>& values,
                                     const std::map<std::string, double>& keys, int bucket_count) {
  if (bucket_count < 1) throw ConfigError("bucket_deltas: bucket_count must be >= 1");
  if (values.empty()) throw InputError("bucket_deltas: no values");
  std::vector<double> key_list;
  key_list.reserve(values.size());
  for (const auto& [id, v] : values) {
    const auto it = keys.find(id);
    if (it == keys.end()) throw InputError("bucket_deltas: missing key for prompt " + id);
    key_list.push_back(it->second);
  }
  std::vector<double> sorted_keys = key_list;
  std::sort(sorted_keys.begin(), sorted_keys.end());
  const int n = static_cast<int>(sorted_keys.size());
  std::vector<double> edges;
  for (int j = 1; j < bucket_count; ++j) {
    const int k = std::clamp(
        static_cast<int>(std::ceil(static_cast<double>(j) / bucket_count * n - 1e-9)), 1, n);
    edges.push_back(sorted_keys[static_cast<std::size_t>(k - 1)]);
  }
  std::vector<std::vector<double>> bucket_values(static_cast<std::size_t>(bucket_count));
  std::size_t idx = 0;
  for (const auto& [id, v] : values) {
    const double key = key_list[idx++];
    std::size_t b = 0;
    for (double e : edges)
      if (key > e) ++b;
    bucket_values[b].push_back(v);
  }
  std::vector<BucketRow> rows;
  rows.reserve(static_cast<std::size_t>(bucket_count));
  for (int b = 0; b < bucket_count; ++b) {
    BucketRow row;
    row.bucket = b + 1;
    const auto& vals = bucket_values[static_cast<std::size_t>(b)];
    row.count = static_cast<int>(vals.size());
    if (!vals.empty()) {
      row.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
      if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals) {
          const double d = v - row.mean;
          ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
        row.ci_half = 1.96 * sd / std::sqrt(static_cast<double>(vals.size()));
      }
    }
    rows.push_back(row);
  }
  return rows;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw InputError("spearman: series size mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double kendall(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw InputError("kendall: series size mismatch");
  const std::size_t n = x.size();
  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0) ++tied_x;
      if (dy == 0.0) ++tied_y;
      if (dx == 0.0 || dy == 0.0) continue;
      if ((dx > 0.0) == (dy > 0.0))
        ++concordant;
      else
        ++discordant;
    }
  }
  const double n0 = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
  const double denom =
      std::sqrt((n0 - static_cast<double>(tied_x)) * (n0 - static_cast<double>(tied_y)));
  if (denom <= 0.0) return 0.0;
  return (static_cast<double>(concordant) - static_cast<double>(discordant)) / denom;
}

PartialCorr partial_spearman(std::span<const double> x, std::span<const double> y,
                             const std::vector<std::vector<double>>& controls) {
  if (x.size() != y.size() || x.empty()) throw InputError("partial_spearman: series size mismatch");
  for (const auto& c : controls)
    if (c.size() != x.size()) throw InputError("partial_spearman: control size mismatch");
  PartialCorr out;
  if (controls.empty()) {
    out.value = spearman(x, y);
    return out;
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  std::vector<std::vector<double>> rc;
  rc.reserve(controls.size());
  for (const auto& c : controls) rc.push_back(average_ranks(c));
  const auto res_x = residualize(rx, rc);
  const auto res_y = residualize(ry, rc);
  const auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double t : v) s += t * t;
    return std::sqrt(s);
  };
  const double floor_norm = 1e-7 * std::sqrt(static_cast<double>(x.size()));
  if (norm(res_x) <= floor_norm || norm(res_y) <= floor_norm) {
    out.degenerate = true;
    out.value = 0.0;
    return out;
  }
  out.value = pearson(res_x, res_y);
  return out;
}

double hypergeom_tail(int population, int successes, int draws, int lo) {
  if (population < 0 || successes < 0 || draws < 0 || successes > population || draws > population)
    throw ConfigError("hypergeom_tail: invalid parameters");
  const int support_lo = std::max(0, draws + successes - population);
  const int support_hi = std::min(draws, successes);
  if (lo <= support_lo) return 1.0;
  if (lo > support_hi) return 0.0;
  std::vector<double> log_fact(static_cast<std::size_t>(population) + 1, 0.0);
  for (int i = 2; i <= population; ++i)
    log_fact[static_cast<std::size_t>(i)] =
        log_fact[static_cast<std::size_t>(i - 1)] + std::log(static_cast<double>(i));
  const auto log_choose = [&](int n, int k) {
    return log_fact[static_cast<std::size_t>(n)] - log_fact[static_cast<std::size_t>(k)] -
           log_fact[static_cast<std::size_t>(n - k)];
  };
  const double log_denom = log_choose(population, draws);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(support_hi - lo + 1));
  for (int i = lo; i <= support_hi; ++i)
    terms.push_back(log_choose(successes, i) + log_choose(population - successes, draws - i) - log_denom);
  const double shift = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - shift);
  return std::min(1.0, std::exp(shift) * acc);
}

OverlapResult topq_overlap(const std::vector<std::pair<std::string, double>>& x,
                           const std::vector<std::pair<std::string, double>>& y, double q) {
  if (x.size() != y.size() || x.empty()) throw InputError("topq_overlap: series size mismatch");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("topq_overlap: q must lie in (0,1]");
  const int n = static_cast<int>(x.size());
  const int k = ceil_count(q, n);
  const auto top_ids = [&](std::vector<std::pair<std::string, double>> series) {
    std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) ids.push_back(series[static_cast<std::size_t>(i)].first);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  const auto a = top_ids(x);
  const auto b = top_ids(y);
  std::vector<std::string> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  OverlapResult out;
  out.k = k;
  out.overlap = static_cast<int>(inter.size());
  out.precision = static_cast<double>(out.overlap) / static_cast<double>(k);
  out.recall = out.precision;
  out.jaccard = static_cast<double>(out.overlap) / static_cast<double>(2 * k - out.overlap);
  out.hypergeom_p = hypergeom_tail(n, k, k, out.overlap);
  return out;
}

Scalarization scalarize_s0_s1(std::span<const double> method_ratings,
                              std::span<const double> base_ratings) {
  if (method_ratings.size() != base_ratings.size() || method_ratings.empty())
    throw InputError("scalarize_s0_s1: paired rating vectors must match in length");
  Scalarization out;
  double wins = 0.0;
  for (std::size_t i = 0; i < method_ratings.size(); ++i) {
    out.delta_s0 += method_ratings[i] - base_ratings[i];
    if (method_ratings[i] > base_ratings[i])
      wins += 1.0;
    else if (method_ratings[i] == base_ratings[i])
      wins += 0.5;
  }
  const double n = static_cast<double>(method_ratings.size());
  out.delta_s0 /= n;
  out.delta_s1 = wins / n - 0.5;
  return out;
}

namespace {

struct PromptData {
  std::string prompt_id;
  // scorer -> rule -> per-prompt eval mean / risk sigma
  std::map<std::string, std::map<std::string, double>> z;
  std::map<std::string, std::map<std::string, double>> sigma;
  double base_key = 0.0;          // disagreement key for HV/buckets (max over scorers)
  double base_sigma_eval = 0.0;   // eval-view sigma of the base selection (first scorer)
  double base_sigma_sel = 0.0;    // selection-view sigma of the base selection (first scorer)
  double base_mu_eval = 0.0;
  double pool_disagreement = 0.0; // max per-candidate eval variance, D(s)
  std::optional<double> base_token_length;
};

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

MethodRow make_row(const std::string& method, const std::string& scorer,
                   const std::vector<double>& z, const std::vector<double>& sigma,
                   const std::vector<double>& delta, const EvalConfig& cfg) {
  MethodRow row;
  row.method = method;
  row.scorer = scorer;
  row.reward = mean_of(z);
  row.risk = mean_of(sigma);
  row.tradeoff = row.reward - cfg.lambda_eval * row.risk;
  row.cvar10 = cvar_over_prompts(z, cfg.cvar_alpha_prompts);
  const WtlCounts counts = wtl(delta, cfg.wtl_eps);
  row.win = counts.win;
  row.tie = counts.tie;
  row.loss = counts.loss;
  row.mean_delta = mean_of(delta);
  return row;
}

}  // namespace

EvalReport evaluate(const Corpus& corpus, const SplitPolicy& split, const SelectionTable& selections,
                    const EvalConfig& cfg) {
  cfg.validate();
  if (selections.empty()) throw InputError("evaluate: no selections given");
  if (!selections.count(cfg.base_rule))
    throw InputError("evaluate: base rule '" + cfg.base_rule + "' not found in selections");
  std::vector<std::string> rules;
  for (const auto& [rule, table] : selections) rules.push_back(rule);

  const auto& scorers = corpus.scorer_ids;
  std::vector<PromptData> prompts;
  prompts.reserve(corpus.pools.size());

  for (const auto& pool : corpus.pools) {
    SplitView view = split_select_eval(pool, split);
    if (!view.has_evaluation) throw InputError("evaluate: no evaluation view for pool " + pool.prompt_id);
    PromptData data;
    data.prompt_id = pool.prompt_id;
    // candidate index lookup
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) index[pool.candidates[i].id] = i;
    for (const auto& rule : rules) {
      const auto& table = selections.at(rule);
      const auto sel_it = table.find(pool.prompt_id);
      if (sel_it == table.end())
        throw InputError("evaluate: rule '" + rule + "' has no selection for prompt " + pool.prompt_id);
      const auto idx_it = index.find(sel_it->second);
      if (idx_it == index.end())
        throw InputError("evaluate: selection references unknown candidate '" + sel_it->second +
                         "' in prompt " + pool.prompt_id);
      const std::size_t ci = idx_it->second;
      for (const auto& scorer : scorers) {
        const auto& eval_values = view.evaluation.candidates[ci].samples.at(scorer).values;
        const auto& risk_values = cfg.risk_view == EvalConfig::RiskView::Selection
                                      ? view.selection.candidates[ci].samples.at(scorer).values
                                      : eval_values;
        data.z[scorer][rule] = sample_stats(eval_values).mean;
        data.sigma[scorer][rule] = sample_stats(risk_values).std_dev;
      }
    }
    const std::string& first_scorer = scorers.front();
    const std::size_t base_ci = index.at(selections.at(cfg.base_rule).at(pool.prompt_id));
    double key = 0.0;
    for (const auto& scorer : scorers)
      key = std::max(key, data.sigma.at(scorer).at(cfg.base_rule));
    data.base_key = key;
    data.base_sigma_sel =
        sample_stats(view.selection.candidates[base_ci].samples.at(first_scorer).values).std_dev;
    data.base_sigma_eval =
        sample_stats(view.evaluation.candidates[base_ci].samples.at(first_scorer).values).std_dev;
    data.base_mu_eval = data.z.at(first_scorer).at(cfg.base_rule);
    data.pool_disagreement = disagreement_summary_D(view.evaluation, first_scorer);
    if (pool.candidates[base_ci].token_length)
      data.base_token_length = static_cast<double>(*pool.candidates[base_ci].token_length);
    prompts.push_back(std::move(data));
  }

  EvalReport report;
  report.prompt_count = static_cast<int>(prompts.size());

  std::map<std::string, double> base_key_by_prompt;
  for (const auto& p : prompts) base_key_by_prompt[p.prompt_id] = p.base_key;
  report.hv_prompts = hv_subset(base_key_by_prompt, cfg.hv_fraction);
  std::vector<bool> in_hv(prompts.size(), false);
  {
    std::vector<std::string> sorted_hv = report.hv_prompts;
    std::sort(sorted_hv.begin(), sorted_hv.end());
    for (std::size_t i = 0; i < prompts.size(); ++i)
      in_hv[i] = std::binary_search(sorted_hv.begin(), sorted_hv.end(), prompts[i].prompt_id);
  }

  const bool multi = scorers.size() > 1;
  const auto emit_rows = [&](std::vector<MethodRow>& rows, auto&& include_prompt) {
    for (const auto& rule : rules) {
      std::vector<double> agg_z, agg_sigma, agg_delta;
      std::vector<std::vector<double>> per_scorer_z(scorers.size()), per_scorer_sigma(scorers.size()),
          per_scorer_delta(scorers.size());
      for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
        if (!include_prompt(pi)) continue;
        const auto& p = prompts[pi];
        double z_acc = 0.0, sigma_acc = 0.0, delta_acc = 0.0;
        for (std::size_t m = 0; m < scorers.size(); ++m) {
          const double z = p.z.at(scorers[m]).at(rule);
          const double sigma = p.sigma.at(scorers[m]).at(rule);
          const double delta = z - p.z.at(scorers[m]).at(cfg.base_rule);
          per_scorer_z[m].push_back(z);
          per_scorer_sigma[m].push_back(sigma);
          per_scorer_delta[m].push_back(delta);
          z_acc += z;
          sigma_acc += sigma;
          delta_acc += delta;
        }
        const double m_count = static_cast<double>(scorers.size());
        agg_z.push_back(z_acc / m_count);
        agg_sigma.push_back(sigma_acc / m_count);
        agg_delta.push_back(delta_acc / m_count);
      }
      if (agg_z.empty()) continue;
      if (multi) {
        for (std::size_t m = 0; m < scorers.size(); ++m)
          rows.push_back(
              make_row(rule, scorers[m], per_scorer_z[m], per_scorer_sigma[m], per_scorer_delta[m], cfg));
      }
      rows.push_back(make_row(rule, "", agg_z, agg_sigma, agg_delta, cfg));
    }
  };
  emit_rows(report.overall, [](std::size_t) { return true; });
  emit_rows(report.high_disagreement, [&](std::size_t pi) { return in_hv[pi]; });

  // Delta-tradeoff buckets keyed by the base disagreement proxy.
  for (const auto& rule : rules) {
    if (rule == cfg.base_rule) continue;
    std::map<std::string, double> delta_tradeoff;
    for (const auto& p : prompts) {
      double acc = 0.0;
      for (const auto& scorer : scorers) {
        const double method_to =
            tradeoff(p.z.at(scorer).at(rule), p.sigma.at(scorer).at(rule), cfg.lambda_eval);
        const double base_to = tradeoff(p.z.at(scorer).at(cfg.base_rule),
                                        p.sigma.at(scorer).at(cfg.base_rule), cfg.lambda_eval);
        acc += method_to - base_to;
      }
      delta_tradeoff[p.prompt_id] = acc / static_cast<double>(scorers.size());
    }
    report.buckets[rule] = bucket_deltas(delta_tradeoff, base_key_by_prompt, cfg.bucket_count);
  }

  // Proxy-validity diagnostics on the base selection: selection-view sigma
  // against eval-view sigma, with eval mean (and token length when present)
  // as controls for the partial correlation.
  if (prompts.size() >= 3) {
    std::vector<double> sel_sigma, eval_sigma, pool_d, mu;
    std::vector<std::pair<std::string, double>> sel_series, eval_series, d_series;
    bool have_lengths = true;
    std::vector<double> lengths;
    for (const auto& p : prompts) {
      sel_sigma.push_back(p.base_sigma_sel);
      eval_sigma.push_back(p.base_sigma_eval);
      pool_d.push_back(p.pool_disagreement);
      mu.push_back(p.base_mu_eval);
      sel_series.emplace_back(p.prompt_id, p.base_sigma_sel);
      eval_series.emplace_back(p.prompt_id, p.base_sigma_eval);
      d_series.emplace_back(p.prompt_id, p.pool_disagreement);
      if (p.base_token_length)
        lengths.push_back(*p.base_token_length);
      else
        have_lengths = false;
    }
    std::vector<std::vector<double>> controls{mu};
    if (have_lengths) controls.push_back(lengths);
    const auto make_row = [&](const std::string& name, const std::vector<double>& x,
                              const std::vector<double>& y) {
      CorrelationRow row;
      row.name = name;
      row.spearman = spearman(x, y);
      row.kendall = kendall(x, y);
      try {
        const PartialCorr pc = partial_spearman(x, y, controls);
        row.partial_spearman = pc.value;
        row.partial_degenerate = pc.degenerate;
      } catch (const InputError&) {
        row.partial_spearman = 0.0;
        row.partial_degenerate = true;
      }
      return row;
    };
    report.correlations.push_back(make_row("base_sigma_sel_vs_eval", sel_sigma, eval_sigma));
    report.correlations.push_back(make_row("base_sigma_sel_vs_pool_D", sel_sigma, pool_d));
    report.overlaps.push_back(topq_overlap(sel_series, eval_series, cfg.overlap_q));
    report.overlaps.push_back(topq_overlap(sel_series, d_series, cfg.overlap_q));
  }
  return report;
}

namespace {

std::string method_table_csv(const std::vector<MethodRow>& rows) {
  std::ostringstream out;
  out << "method,reward,risk,tradeoff,cvar10,win,tie,loss,mean_delta\n";
  for (const auto& row : rows) {
    const std::string name = row.scorer.empty() ? row.method : row.method + "@" + row.scorer;
    out << csv_field(name) << ',' << csv_num(row.reward) << ',' << csv_num(row.risk) << ','
        << csv_num(row.tradeoff) << ',' << csv_num(row.cvar10) << ',' << row.win << ',' << row.tie
        << ',' << row.loss << ',' << csv_num(row.mean_delta) << '\n';
  }
  return out.str();
}

}  // namespace

std::string report_csv(const EvalReport& report) { return method_table_csv(report.overall); }

std::string hv_report_csv(const EvalReport& report) {
  return method_table_csv(report.high_disagreement);
}

std::string buckets_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "method,bucket,x,y,ci,count\n";
  for (const auto& [method, rows] : report.buckets) {
    for (const auto& row : rows)
      out << csv_field(method) << ',' << row.bucket << ',' << row.bucket << ',' << csv_num(row.mean)
          << ',' << csv_num(row.ci_half) << ',' << row.count << '\n';
  }
  return out.str();
}

std::string correlations_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "name,spearman,kendall,partial_spearman,partial_degenerate\n";
  for (const auto& row : report.correlations)
    out << csv_field(row.name) << ',' << csv_num(row.spearman) << ',' << csv_num(row.kendall) << ','
        << csv_num(row.partial_spearman) << ',' << (row.partial_degenerate ? "true" : "false") << '\n';
  return out.str();
}

std::string overlaps_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "k,overlap,precision,recall,jaccard,hypergeom_p\n";
  for (const auto& o : report.overlaps)
    out << o.k << ',' << o.overlap << ',' << csv_num(o.precision) << ',' << csv_num(o.recall) << ','
        << csv_num(o.jaccard) << ',' << csv_num(o.hypergeom_p) << '\n';
  return out.str();
}

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  const auto rows_json = [](const std::vector<MethodRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
      arr.push_back({{"method", row.method},
                     {"scorer", row.scorer},
                     {"reward", row.reward},
                     {"risk", row.risk},
                     {"tradeoff", row.tradeoff},
                     {"cvar10", row.cvar10},
                     {"win", row.win},
                     {"tie", row.tie},
                     {"loss", row.loss},
                     {"mean_delta", row.mean_delta}});
    }
    return arr;
  };
  j["prompt_count"] = report.prompt_count;
  j["overall"] = rows_json(report.overall);
  j["high_disagreement"] = rows_json(report.high_disagreement);
  j["hv_prompts"] = report.hv_prompts;
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& [method, rows] : report.buckets) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows)
      arr.push_back(
          {{"bucket", row.bucket}, {"mean", row.mean}, {"ci", row.ci_half}, {"count", row.count}});
    buckets[method] = arr;
  }
  j["buckets"] = buckets;
  nlohmann::json corr = nlohmann::json::array();
  for (const auto& row : report.correlations)
    corr.push_back({{"name", row.name},
                    {"spearman", row.spearman},
                    {"kendall", row.kendall},
                    {"partial_spearman", row.partial_spearman},
                    {"partial_degenerate", row.partial_degenerate}});
  j["correlations"] = corr;
  nlohmann::json overlaps = nlohmann::json::array();
  for (const auto& o : report.overlaps)
    overlaps.push_back({{"k", o.k},
                        {"overlap", o.overlap},
                        {"precision", o.precision},
                        {"recall", o.recall},
                        {"jaccard", o.jaccard},
                        {"hypergeom_p", o.hypergeom_p}});
  j["overlaps"] = overlaps;
  return j.dump(2);
}

}  // namespace riskrank
