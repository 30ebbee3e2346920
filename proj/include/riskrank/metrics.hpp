#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "riskrank/corpus.hpp"

namespace riskrank {

struct EvalConfig {
  double lambda_eval = 1.99;       // tradeoff weight, shared across methods
  double cvar_alpha_prompts = 0.10;
  double hv_fraction = 0.20;       // high-disagreement subset size
  double wtl_eps = 0.0;            // win/tie/loss tie threshold
  int bucket_count = 5;
  double overlap_q = 0.20;
  std::string base_rule = "mean";
  enum class RiskView { Selection, Eval } risk_view = RiskView::Selection;

  void validate() const;
};

double tradeoff(double mu_eval, double sigma_sel, double lambda_eval);

// Mean of the ceil(alpha * N) smallest prompt outcomes.
double cvar_over_prompts(std::span<const double> outcomes, double alpha);

struct WtlCounts {
  int win = 0;
  int tie = 0;
  int loss = 0;
};

WtlCounts wtl(std::span<const double> deltas, double eps);

// Top ceil(p*N) prompts by descending key; ties by ascending prompt id.
std::vector<std::string> hv_subset(const std::map<std::string, double>& base_sigma, double p);

// Max over candidates of the sample variance (n-1 denominator) under one scorer.
double disagreement_summary_D(const CandidatePool& pool, const std::string& scorer);

struct BucketRow {
  int bucket = 0;  // 1-based
  double mean = 0.0;
  double ci_half = 0.0;  // 1.96 * standard error (0 when count < 2)
  int count = 0;
};

// Quantile-edged buckets of `values` keyed by `keys`; ties at an edge fall
// into the lower bucket. Buckets left empty report count 0.
std::vector<BucketRow> bucket_deltas(const std::map<std::string, double>& values,
                                     const std::map<std::string, double>& keys, int bucket_count);

double spearman(std::span<const double> x, std::span<const double> y);
double kendall(std::span<const double> x, std::span<const double> y);  // tau-b

struct PartialCorr {
  double value = 0.0;
  bool degenerate = false;  // a residual series vanished after controlling
};

// Rank-transform every series, residualize the x/y ranks on the controls by
// least squares with an intercept, then Pearson of the residuals.
PartialCorr partial_spearman(std::span<const double> x, std::span<const double> y,
                             const std::vector<std::vector<double>>& controls);

struct OverlapResult {
  double precision = 0.0;
  double recall = 0.0;
  double jaccard = 0.0;
  int overlap = 0;
  int k = 0;
  double hypergeom_p = 1.0;  // P(X >= overlap), X ~ Hypergeometric(N, k, k)
};

OverlapResult topq_overlap(const std::vector<std::pair<std::string, double>>& x,
                           const std::vector<std::pair<std::string, double>>& y, double q);

// Upper tail P(X >= lo) for X ~ Hypergeometric(population, successes, draws),
// summed from exact log-factorials.
double hypergeom_tail(int population, int successes, int draws, int lo);

struct Scalarization {
  double delta_s0 = 0.0;  // mean paired rating difference
  double delta_s1 = 0.0;  // win-rate against the baseline minus 1/2
};

Scalarization scalarize_s0_s1(std::span<const double> method_ratings,
                              std::span<const double> base_ratings);

struct MethodRow {
  std::string method;
  std::string scorer;  // empty for single-scorer corpora or aggregated rows
  double reward = 0.0;
  double risk = 0.0;
  double tradeoff = 0.0;
  double cvar10 = 0.0;
  int win = 0;
  int tie = 0;
  int loss = 0;
  double mean_delta = 0.0;
};

struct CorrelationRow {
  std::string name;
  double spearman = 0.0;
  double kendall = 0.0;
  double partial_spearman = 0.0;
  bool partial_degenerate = false;
};

struct EvalReport {
  std::vector<MethodRow> overall;
  std::vector<MethodRow> high_disagreement;
  std::map<std::string, std::vector<BucketRow>> buckets;  // method -> delta-tradeoff buckets
  std::vector<CorrelationRow> correlations;
  std::vector<OverlapResult> overlaps;
  std::vector<std::string> hv_prompts;
  int prompt_count = 0;
};

// rule -> prompt_id -> candidate_id
using SelectionTable = std::map<std::string, std::map<std::string, std::string>>;

EvalReport evaluate(const Corpus& corpus, const SplitPolicy& split, const SelectionTable& selections,
                    const EvalConfig& cfg);

std::string report_csv(const EvalReport& report);                 // fixed columns, RFC 4180
std::string hv_report_csv(const EvalReport& report);              // same columns, HV subset
std::string buckets_csv(const EvalReport& report);                // method,bucket,x,y,ci,count
std::string correlations_csv(const EvalReport& report);
std::string overlaps_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace riskrank
