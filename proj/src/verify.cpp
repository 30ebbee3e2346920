#include "riskrank/verify.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "riskrank/corpus.hpp"
#include "riskrank/panel.hpp"
#include "riskrank/risk.hpp"
#include "riskrank/rng.hpp"

namespace riskrank {

namespace {

constexpr std::size_t kMaxNotes = 20;

void record_failure(VerifySuiteResult& suite, const std::string& detail) {
  ++suite.failures;
  if (suite.notes.size() < kMaxNotes) suite.notes.push_back(detail);
}

std::vector<double> random_samples(Rng& rng, int n, double lo, double hi) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

VerifySuiteResult verify_kl_equivalence(const VerifyOptions& opt) {
  VerifySuiteResult suite;
  suite.name = "kl_dro";
  Rng rng = derive_stream(opt.seed, "kl_dro");
  const double betas[] = {0.1, 1.0, 5.0};
  for (int c = 0; c < opt.kl_cases; ++c) {
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.max_n)));
    const double beta = betas[rng.below(3)];
    const auto values = random_samples(rng, n, -10.0, 10.0);
    ++suite.cases;
    if (n > kKlOracleMaxN) {
      ++suite.skipped;
      if (suite.notes.size() < kMaxNotes)
        suite.notes.push_back("case " + std::to_string(c) + ": n=" + std::to_string(n) +
                              " beyond oracle cap, skipped");
      continue;
    }
    const OracleResult oracle = kl_dro_oracle(values, beta);
    if (!oracle.converged) {
      record_failure(suite, "case " + std::to_string(c) + ": oracle did not converge");
      continue;
    }
    const double err = std::abs(entropic_value(values, beta) - oracle.value);
    suite.max_error = std::max(suite.max_error, err);
    if (err > opt.oracle_tol)
      record_failure(suite, "case " + std::to_string(c) + ": |closed - oracle| = " + format_double(err));
  }
  return suite;
}

VerifySuiteResult verify_chi2(const VerifyOptions& opt) {
  VerifySuiteResult suite;
  suite.name = "chi2_dro";
  Rng rng = derive_stream(opt.seed, "chi2_dro");
  // Pinned two-point case first: [0,1] with rho = 0.25 has exact value 0.25.
  {
    const std::vector<double> v{0.0, 1.0};
    const RobustMean closed = chi2_robust_mean(sample_stats(v), 0.25);
    const OracleResult oracle = chi2_dro_oracle(v, 0.25);
    ++suite.cases;
    const double err = std::max(std::abs(closed.value - 0.25), std::abs(oracle.value - 0.25));
    suite.max_error = std::max(suite.max_error, err);
    if (!closed.tight || err > opt.oracle_tol) record_failure(suite, "pinned case [0,1], rho=0.25");
  }
  for (int c = 0; c < opt.chi2_cases; ++c) {
    const int n = 2 + static_cast<int>(rng.below(3));  // 2..4
    const double rho = rng.uniform(0.0, 4.0);
    const auto values = random_samples(rng, n, -10.0, 10.0);
    ++suite.cases;
    const RobustMean closed = chi2_robust_mean(sample_stats(values), rho);
    const OracleResult oracle = chi2_dro_oracle(values, rho);
    if (!oracle.converged) {
      record_failure(suite, "case " + std::to_string(c) + ": oracle did not converge");
      continue;
    }
    if (closed.tight) {
      const double err = std::abs(closed.value - oracle.value);
      suite.max_error = std::max(suite.max_error, err);
      if (err > opt.oracle_tol)
        record_failure(suite,
                       "case " + std::to_string(c) + ": tight gap = " + format_double(err));
    } else {
      const double overshoot = closed.value - oracle.value;
      suite.max_error = std::max(suite.max_error, std::max(0.0, overshoot));
      if (overshoot > opt.oracle_tol)
        record_failure(suite, "case " + std::to_string(c) +
                                 ": closed form exceeds oracle by " + format_double(overshoot));
    }
  }
  return suite;
}

VerifySuiteResult verify_lambda_rho(const VerifyOptions& opt) {
  VerifySuiteResult suite;
  suite.name = "lambda_rho";
  Rng rng = derive_stream(opt.seed, "lambda_rho");
  for (int c = 0; c < opt.lambda_rho_cases; ++c) {
    const int n = 2 + static_cast<int>(rng.below(7));  // 2..8
    const auto values = random_samples(rng, n, -10.0, 10.0);
    const SampleStats stats = sample_stats(values);
    ++suite.cases;
    if (stats.std_dev == 0.0) continue;
    // Largest lambda keeping the extremal density nonnegative:
    // lambda * (max - mean) <= std * (n-1)/n.
    const double spread = stats.max_value - stats.mean;
    const double lambda_cap = spread > 0.0
                                  ? stats.std_dev * (static_cast<double>(n) - 1.0) /
                                        (static_cast<double>(n) * spread)
                                  : 1.0;
    const double lambda = rng.uniform(0.0, 0.9 * lambda_cap);
    const RobustMean rm = chi2_robust_mean(stats, rho_from_lambda(lambda, n));
    const double target = stats.mean - lambda * stats.std_dev;
    const double err = std::abs(rm.value - target);
    suite.max_error = std::max(suite.max_error, err);
    if (!rm.tight)
      record_failure(suite, "case " + std::to_string(c) + ": expected tight regime");
    else if (err > opt.identity_tol)
      record_failure(suite, "case " + std::to_string(c) + ": identity error " + format_double(err));
  }
  return suite;
}

VerifySuiteResult verify_scorer_dro(const VerifyOptions& opt) {
  VerifySuiteResult suite;
  suite.name = "scorer_dro";
  Rng rng = derive_stream(opt.seed, "scorer_dro");
  const double gammas[] = {0.1, 1.0, 10.0};
  for (int c = 0; c < opt.scorer_cases; ++c) {
    const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(kScorerOracleMaxM)));
    const double gamma = gammas[rng.below(3)];
    const auto values = random_samples(rng, m, -5.0, 5.0);
    ++suite.cases;
    const double agg = aggregate_values(values, gamma);
    const OracleResult oracle = scorer_dro_oracle(values, gamma);
    if (!oracle.converged) {
      record_failure(suite, "case " + std::to_string(c) + ": oracle did not converge");
      continue;
    }
    double err = std::abs(agg - oracle.value);
    const double v_min = *std::min_element(values.begin(), values.end());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(m);
    // sandwich min <= agg <= mean plus monotonicity in gamma
    if (agg < v_min - 1e-9 || agg > mean + 1e-9)
      record_failure(suite, "case " + std::to_string(c) + ": sandwich violated");
    const double agg_tighter = aggregate_values(values, gamma * 2.0);
    if (agg_tighter > agg + 1e-9)
      record_failure(suite, "case " + std::to_string(c) + ": not monotone in gamma");
    suite.max_error = std::max(suite.max_error, err);
    if (err > opt.oracle_tol)
      record_failure(suite, "case " + std::to_string(c) + ": |agg - oracle| = " + format_double(err));
  }
  return suite;
}

std::vector<VerifySuiteResult> run_all_verifications(const VerifyOptions& opt) {
  return {verify_kl_equivalence(opt), verify_chi2(opt), verify_lambda_rho(opt),
          verify_scorer_dro(opt)};
}

}  // namespace riskrank
