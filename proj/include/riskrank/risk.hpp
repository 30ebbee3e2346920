#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace riskrank {

struct Bounds {
  double lo = -10.0;
  double hi = 10.0;
};

// Per-sample-set summary. std_dev uses the n-1 denominator, var_uncentered
// the 1/n denominator; for n=1 both are 0 and `degenerate` is set.
struct SampleStats {
  double mean = 0.0;
  double std_dev = 0.0;
  double var_uncentered = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  int n = 0;
  bool degenerate = false;
};

struct RiskConfig {
  double beta = 1.0;         // entropic temperature, > 0
  double delta = 0.1;        // LCB failure probability, in (0,1)
  double alpha_scale = 1.0;  // risk-budget scaling on the LCB penalty, > 0 allowed 0 for "off"
  double cvar_alpha = 0.1;   // lower-tail fraction, in (0,1]
  std::optional<double> subgaussian_nu;                  // nu > 0
  std::optional<std::pair<double, double>> proxy_eps;    // (eps_mu, eps_sigma), both >= 0

  void validate() const;
};

struct RiskProfile {
  SampleStats stats;
  double entropic_value = 0.0;
  double risk_premium = 0.0;
  std::optional<double> cvar;
  std::optional<double> lcb;
};

SampleStats sample_stats(std::span<const double> values);

// Plug-in entropic value -(1/beta) * log( mean_i exp(-beta * R_i) ),
// computed with a max shift so it is finite for any finite input.
double entropic_value(std::span<const double> values, double beta);

// mean - entropic_value; >= 0 up to rounding.
double risk_premium(std::span<const double> values, double beta);

// Mean of the k smallest values with k = max(1, ceil(alpha * n)).
double empirical_cvar(std::span<const double> values, double alpha);

// Empirical-Bernstein lower confidence bound with a K-way union bound:
// with delta' = delta/K,
//   mean - alpha_scale * [ sqrt(2*var*log(2/delta')/n) + 7*(hi-lo)*log(2/delta')/(3*(n-1)) ].
// Requires n >= 2.
double lcb_bounded(const SampleStats& stats, int k_candidates, const RiskConfig& cfg, Bounds bounds);

// mean - alpha_scale * nu * sqrt(2*log(K/delta)/n); requires subgaussian_nu.
double lcb_subgaussian(const SampleStats& stats, int k_candidates, const RiskConfig& cfg);

// Additive slack eps_mu + alpha_scale * eps_sigma * sqrt(log(K/delta)/n)
// that callers subtract from a proxy-based LCB.
double proxy_slack(const RiskConfig& cfg, int k_candidates, int n);

struct RobustMean {
  double value = 0.0;
  bool tight = false;
};

// Worst-case mean over a chi-square ball of radius rho around the empirical
// distribution: mean - sqrt(rho)*sqrt(var_uncentered). `tight` reports
// whether the extremal density is nonnegative on the sample support, in
// which case the value is exact; otherwise it is a valid lower bound.
RobustMean chi2_robust_mean(const SampleStats& stats, double rho);

// rho = (n/(n-1)) * lambda^2: the radius at which the chi-square robust mean
// equals mean - lambda*std_dev in the tight regime.
double rho_from_lambda(double lambda, int n);

struct OracleResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> weights;  // minimizing distribution over sample atoms
};

inline constexpr int kKlOracleMaxN = 8;
inline constexpr int kChi2OracleMaxN = 4;

// Verification-only: minimizes sum_i q_i R_i + (1/beta) sum_i q_i log(n q_i)
// over the simplex, by dense grid refinement for n <= 3 and multiplicative
// weights otherwise. Never evaluates the log-sum-exp closed form.
OracleResult kl_dro_oracle(std::span<const double> values, double beta, int budget = 200);

// Verification-only: minimizes sum_i q_i R_i over the simplex intersected
// with { n * sum_i (q_i - 1/n)^2 <= rho }, by nested grid refinement.
OracleResult chi2_dro_oracle(std::span<const double> values, double rho, int budget = 60);

// Convenience bundle; cvar always filled, lcb only when n >= 2 and bounds given.
RiskProfile risk_profile(std::span<const double> values, const RiskConfig& cfg, int k_candidates,
                         std::optional<Bounds> bounds);

}  // namespace riskrank
