#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace riskrank {

struct VerifySuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  int skipped = 0;
  double max_error = 0.0;
  std::vector<std::string> notes;  // per-case failure/skip details, capped
};

struct VerifyOptions {
  std::uint64_t seed = 20250805;
  int kl_cases = 1000;
  int chi2_cases = 300;
  int lambda_rho_cases = 100;
  int scorer_cases = 1000;
  int max_n = 6;  // sample sizes drawn in [2, max_n]; cases above an oracle cap are skipped
  double oracle_tol = 1e-6;
  double identity_tol = 1e-12;
};

// Closed-form entropic value against the simplex-descent oracle.
VerifySuiteResult verify_kl_equivalence(const VerifyOptions& opt);

// Chi-square robust mean: tight cases match the grid oracle, non-tight cases
// stay below it; includes the pinned two-point case.
VerifySuiteResult verify_chi2(const VerifyOptions& opt);

// rho(lambda) calibration: robust mean equals mean - lambda*std in the tight
// regime, to identity tolerance.
VerifySuiteResult verify_lambda_rho(const VerifyOptions& opt);

// Soft worst-case scorer aggregation against its simplex oracle, plus the
// sandwich and gamma-monotonicity inequalities.
VerifySuiteResult verify_scorer_dro(const VerifyOptions& opt);

std::vector<VerifySuiteResult> run_all_verifications(const VerifyOptions& opt);

}  // namespace riskrank
