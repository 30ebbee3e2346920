#include "riskrank/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "riskrank/errors.hpp"

namespace riskrank {

namespace {

// ceil with a guard against values like 0.2*5 landing a hair above an integer.
int tail_count(double alpha, int n) {
  const int k = static_cast<int>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
  return std::clamp(k, 1, n);
}

void require_nonempty(std::span<const double> values) {
  if (values.empty()) throw ConfigError("sample set is empty");
}

void require_positive_beta(double beta) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive, got " + std::to_string(beta));
}

// Variational objective of the KL oracle: sum q_i R_i + (1/beta) sum q_i log(n q_i),
// with 0*log(0) = 0.
double kl_objective(std::span<const double> r, std::span<const double> q, double beta) {
  const double n = static_cast<double>(r.size());
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (q[i] <= 0.0) continue;
    total += q[i] * r[i] + q[i] * std::log(n * q[i]) / beta;
  }
  return total;
}

double chi2_objective(std::span<const double> r, std::span<const double> q) {
  double total = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) total += q[i] * r[i];
  return total;
}

// Radial projection onto the chi-square ball around uniform. Points inside
// are untouched; points outside shrink toward uniform, which preserves both
// simplex constraints.
void chi2_project(std::vector<double>& q, double rho) {
  const double n = static_cast<double>(q.size());
  double d = 0.0;
  for (double qi : q) {
    const double g = qi - 1.0 / n;
    d += g * g;
  }
  const double chi2 = n * d;
  if (chi2 <= rho || chi2 == 0.0) return;
  const double s = std::sqrt(rho / chi2);
  for (double& qi : q) qi = 1.0 / n + s * (qi - 1.0 / n);
}

// Nested grid refinement over the simplex: enumerate a lattice on the free
// coordinates of a shrinking box around the incumbent, keep the best feasible
// point. `feasible`/`objective` are the only problem-specific pieces.
template <typename Objective, typename Feasible>
OracleResult grid_refine(int n, int rounds, int points_per_dim, Objective&& objective,
                         Feasible&& feasible) {
  OracleResult result;
  std::vector<double> best(n, 1.0 / n);
  if (!feasible(best)) {
    // Uniform is always feasible for both oracles; treat anything else as a bug.
    throw ConfigError("oracle: center of the simplex infeasible");
  }
  double best_value = objective(best);
  double half_width = 1.0;
  const int free_dims = n - 1;
  std::vector<int> idx(free_dims, 0);
  std::vector<double> q(n, 0.0);
  for (int round = 0; round < rounds; ++round) {
    const std::vector<double> center = best;
    std::fill(idx.begin(), idx.end(), 0);
    bool done = free_dims == 0;
    while (!done) {
      double partial = 0.0;
      bool valid = true;
      for (int d = 0; d < free_dims; ++d) {
        const double frac = points_per_dim == 1
                                ? 0.5
                                : static_cast<double>(idx[d]) / static_cast<double>(points_per_dim - 1);
        double v = center[d] + (2.0 * frac - 1.0) * half_width;
        v = std::clamp(v, 0.0, 1.0);
        q[d] = v;
        partial += v;
        if (partial > 1.0 + 1e-12) {
          valid = false;
          break;
        }
      }
      if (valid) {
        q[n - 1] = std::max(0.0, 1.0 - partial);
        if (feasible(q)) {
          const double val = objective(q);
          if (val < best_value) {
            best_value = val;
            best.assign(q.begin(), q.end());
          }
        }
      }
      // odometer increment
      int d = 0;
      for (;;) {
        if (d == free_dims) {
          done = true;
          break;
        }
        if (++idx[d] < points_per_dim) break;
        idx[d] = 0;
        ++d;
      }
    }
    half_width *= 0.5;
    ++result.iterations;
  }
  result.value = best_value;
  result.weights = std::move(best);
  result.converged = true;
  return result;
}

}  // namespace

void RiskConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("risk config: beta must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("risk config: delta must lie in (0,1)");
  if (!(alpha_scale >= 0.0)) throw ConfigError("risk config: alpha_scale must be >= 0");
  if (!(cvar_alpha > 0.0 && cvar_alpha <= 1.0))
    throw ConfigError("risk config: cvar_alpha must lie in (0,1]");
  if (subgaussian_nu && !(*subgaussian_nu >= 0.0))
    throw ConfigError("risk config: subgaussian_nu must be >= 0");
  if (proxy_eps && (!(proxy_eps->first >= 0.0) || !(proxy_eps->second >= 0.0)))
    throw ConfigError("risk config: proxy_eps components must be >= 0");
}

SampleStats sample_stats(std::span<const double> values) {
  require_nonempty(values);
  SampleStats s;
  s.n = static_cast<int>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  s.min_value = *std::min_element(values.begin(), values.end());
  s.max_value = *std::max_element(values.begin(), values.end());
  if (s.n == 1) {
    s.degenerate = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    ss += d * d;
  }
  s.var_uncentered = ss / static_cast<double>(s.n);
  s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

double entropic_value(std::span<const double> values, double beta) {
  require_nonempty(values);
  require_positive_beta(beta);
  // log mean exp(-beta*R_i), shifted by the largest exponent.
  const double r_min = *std::min_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp(-beta * (v - r_min));
  const double log_mean = std::log(acc / static_cast<double>(values.size())) - beta * r_min;
  return -log_mean / beta;
}

double risk_premium(std::span<const double> values, double beta) {
  return sample_stats(values).mean - entropic_value(values, beta);
}

double empirical_cvar(std::span<const double> values, double alpha) {
  require_nonempty(values);
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("cvar alpha must lie in (0,1], got " + std::to_string(alpha));
  const int n = static_cast<int>(values.size());
  const int k = tail_count(alpha, n);
  std::vector<double> sorted(values.begin(), values.end());
  std::stable_sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.begin() + k, 0.0) / static_cast<double>(k);
}

double lcb_bounded(const SampleStats& stats, int k_candidates, const RiskConfig& cfg, Bounds bounds) {
  cfg.validate();
  if (stats.n < 2) throw ConfigError("lcb_bounded requires n >= 2");
  if (k_candidates < 1) throw ConfigError("lcb_bounded requires K >= 1");
  if (!(bounds.lo < bounds.hi)) throw ConfigError("lcb_bounded requires lo < hi");
  const double n = static_cast<double>(stats.n);
  const double log_term = std::log(2.0 * static_cast<double>(k_candidates) / cfg.delta);
  const double leading = std::sqrt(2.0 * stats.std_dev * stats.std_dev * log_term / n);
  const double lower_order = 7.0 * (bounds.hi - bounds.lo) * log_term / (3.0 * (n - 1.0));
  return stats.mean - cfg.alpha_scale * (leading + lower_order);
}

double lcb_subgaussian(const SampleStats& stats, int k_candidates, const RiskConfig& cfg) {
  cfg.validate();
  if (!cfg.subgaussian_nu) throw ConfigError("lcb_subgaussian requires subgaussian_nu");
  if (stats.n < 1) throw ConfigError("lcb_subgaussian requires n >= 1");
  const double log_term = std::log(static_cast<double>(k_candidates) / cfg.delta);
  return stats.mean -
         cfg.alpha_scale * (*cfg.subgaussian_nu) * std::sqrt(2.0 * log_term / static_cast<double>(stats.n));
}

double proxy_slack(const RiskConfig& cfg, int k_candidates, int n) {
  cfg.validate();
  if (!cfg.proxy_eps) throw ConfigError("proxy_slack requires proxy_eps");
  const auto [eps_mu, eps_sigma] = *cfg.proxy_eps;
  const double log_term = std::log(static_cast<double>(k_candidates) / cfg.delta);
  return eps_mu + cfg.alpha_scale * eps_sigma * std::sqrt(log_term / static_cast<double>(n));
}

RobustMean chi2_robust_mean(const SampleStats& stats, double rho) {
  if (!(rho >= 0.0)) throw ConfigError("chi2_robust_mean requires rho >= 0");
  const double sigma = std::sqrt(stats.var_uncentered);
  RobustMean out;
  if (sigma == 0.0 || rho == 0.0) {
    out.value = stats.mean - std::sqrt(rho) * sigma;
    out.tight = true;
    return out;
  }
  out.value = stats.mean - std::sqrt(rho) * sigma;
  // Extremal density 1 - sqrt(rho)*(R_i - mean)/sigma stays nonnegative iff
  // the largest sample does not overshoot mean + sigma/sqrt(rho).
  out.tight = std::sqrt(rho) * (stats.max_value - stats.mean) <= sigma * (1.0 + 1e-12);
  return out;
}

double rho_from_lambda(double lambda, int n) {
  if (n < 2) throw ConfigError("rho_from_lambda requires n >= 2");
  if (!(lambda >= 0.0)) throw ConfigError("rho_from_lambda requires lambda >= 0");
  const double nn = static_cast<double>(n);
  return nn / (nn - 1.0) * lambda * lambda;
}

OracleResult kl_dro_oracle(std::span<const double> values, double beta, int budget) {
  require_nonempty(values);
  require_positive_beta(beta);
  const int n = static_cast<int>(values.size());
  if (n > kKlOracleMaxN)
    throw ConfigError("kl_dro_oracle supports n <= " + std::to_string(kKlOracleMaxN));
  if (n == 1) {
    OracleResult r;
    r.value = values[0];
    r.weights = {1.0};
    r.converged = true;
    return r;
  }
  if (n <= 3) {
    auto objective = [&](std::span<const double> q) { return kl_objective(values, q, beta); };
    auto feasible = [](std::span<const double>) { return true; };
    return grid_refine(n, std::max(budget, 45), 25, objective, feasible);
  }
  // Multiplicative-weights descent with step beta/2: a log-space contraction
  // toward the stationary point of the variational objective.
  std::vector<double> log_q(static_cast<std::size_t>(n), -std::log(static_cast<double>(n)));
  OracleResult result;
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> q(static_cast<std::size_t>(n), 0.0);
  for (int it = 0; it < budget; ++it) {
    // log q <- (log q)/2 - (beta/2) R, renormalized.
    double shift = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      log_q[i] = 0.5 * log_q[i] - 0.5 * beta * values[i];
      shift = std::max(shift, log_q[i]);
    }
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(log_q[i] - shift);
    const double log_z = shift + std::log(z);
    for (int i = 0; i < n; ++i) {
      log_q[i] -= log_z;
      q[i] = std::exp(log_q[i]);
    }
    const double val = kl_objective(values, q, beta);
    ++result.iterations;
    if (std::abs(val - prev) <= 1e-15 * (1.0 + std::abs(val))) {
      result.value = val;
      result.weights = q;
      result.converged = true;
      return result;
    }
    prev = val;
  }
  result.value = prev;
  result.weights = q;
  result.converged = false;
  return result;
}

OracleResult chi2_dro_oracle(std::span<const double> values, double rho, int budget) {
  require_nonempty(values);
  if (!(rho >= 0.0)) throw ConfigError("chi2_dro_oracle requires rho >= 0");
  const int n = static_cast<int>(values.size());
  if (n > kChi2OracleMaxN)
    throw ConfigError("chi2_dro_oracle supports n <= " + std::to_string(kChi2OracleMaxN));
  if (n == 1 || rho == 0.0) {
    OracleResult r;
    r.value = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    r.weights.assign(static_cast<std::size_t>(n), 1.0 / n);
    r.converged = true;
    return r;
  }
  // Nested lattice refinement with every point projected into the ball, so
  // the search can track the curved boundary where the optimum sits.
  OracleResult result;
  std::vector<double> best(static_cast<std::size_t>(n), 1.0 / n);
  double best_value = chi2_objective(values, best);
  const int rounds = std::max(budget, 60);
  const int points_per_dim = 13;
  double half_width = 1.0;
  const int free_dims = n - 1;
  std::vector<int> idx(static_cast<std::size_t>(free_dims), 0);
  std::vector<double> q(static_cast<std::size_t>(n), 0.0);
  for (int round = 0; round < rounds; ++round) {
    const std::vector<double> center = best;
    std::fill(idx.begin(), idx.end(), 0);
    bool done = false;
    while (!done) {
      double partial = 0.0;
      bool valid = true;
      for (int d = 0; d < free_dims; ++d) {
        const double frac = static_cast<double>(idx[static_cast<std::size_t>(d)]) /
                            static_cast<double>(points_per_dim - 1);
        double v = center[static_cast<std::size_t>(d)] + (2.0 * frac - 1.0) * half_width;
        v = std::clamp(v, 0.0, 1.0);
        q[static_cast<std::size_t>(d)] = v;
        partial += v;
        if (partial > 1.0 + 1e-12) {
          valid = false;
          break;
        }
      }
      if (valid) {
        q[static_cast<std::size_t>(n - 1)] = std::max(0.0, 1.0 - partial);
        std::vector<double> projected = q;
        chi2_project(projected, rho);
        const double val = chi2_objective(values, projected);
        if (val < best_value) {
          best_value = val;
          best = std::move(projected);
        }
      }
      int d = 0;
      for (;;) {
        if (d == free_dims) {
          done = true;
          break;
        }
        if (++idx[static_cast<std::size_t>(d)] < points_per_dim) break;
        idx[static_cast<std::size_t>(d)] = 0;
        ++d;
      }
    }
    half_width *= 0.5;
    ++result.iterations;
  }
  result.value = best_value;
  result.weights = std::move(best);
  result.converged = true;
  return result;
}

RiskProfile risk_profile(std::span<const double> values, const RiskConfig& cfg, int k_candidates,
                         std::optional<Bounds> bounds) {
  cfg.validate();
  RiskProfile p;
  p.stats = sample_stats(values);
  p.entropic_value = entropic_value(values, cfg.beta);
  p.risk_premium = p.stats.mean - p.entropic_value;
  p.cvar = empirical_cvar(values, cfg.cvar_alpha);
  if (bounds && p.stats.n >= 2) p.lcb = lcb_bounded(p.stats, k_candidates, cfg, *bounds);
  return p;
}

}  // namespace riskrank
