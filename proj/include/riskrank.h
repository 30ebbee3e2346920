/* C interface to the riskrank engine.
 *
 * All functions return RR_OK on success; on failure they return a status
 * code and leave a message retrievable with rr_last_error() (thread-local).
 * Handles are opaque and must be released with their matching close call.
 */
#ifndef RISKRANK_H
#define RISKRANK_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct rr_corpus_s rr_corpus;

typedef enum rr_status_e {
  RR_OK = 0,
  RR_VERIFY_FAILED = 1,
  RR_INPUT_ERROR = 2,
  RR_CONFIG_ERROR = 3,
  RR_INTERNAL_ERROR = 4
} rr_status;

const char* rr_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
const char* rr_last_error(void);

/* Opens a JSONL corpus. truncate_l may be NULL to disable clipping. */
rr_status rr_corpus_open(const char* path, double bound_lo, double bound_hi,
                         const double* truncate_l, rr_corpus** out);
void rr_corpus_close(rr_corpus* corpus);
long rr_corpus_prompt_count(const rr_corpus* corpus);
long rr_corpus_scorer_count(const rr_corpus* corpus);

/* Commands. config_json may be NULL or "{}" for defaults; fields mirror the
 * CLI flags one-to-one. Each call writes its artifacts plus a resolved
 * config echo under out_dir. */
rr_status rr_run_select(const rr_corpus* corpus, const char* config_json, const char* out_dir);
rr_status rr_run_evaluate(const rr_corpus* corpus, const char* config_json, const char* out_dir);
rr_status rr_run_calibrate(const rr_corpus* corpus, const char* config_json, const char* out_dir);
rr_status rr_run_simulate(const char* config_json, const char* out_dir);
/* Returns RR_VERIFY_FAILED when any tolerance is violated. */
rr_status rr_run_verify(const char* config_json, const char* out_dir);

/* Scalar kernels, exposed for direct FFI use. */
rr_status rr_entropic_value(const double* values, long n, double beta, double* out);
rr_status rr_risk_premium(const double* values, long n, double beta, double* out);
rr_status rr_empirical_cvar(const double* values, long n, double alpha, double* out);
rr_status rr_chi2_robust_mean(const double* values, long n, double rho, double* out_value,
                              int* out_tight);
rr_status rr_soft_worst_case(const double* values, long m, double gamma, double* out);
rr_status rr_lcb_bounded(const double* values, long n, long k_candidates, double delta,
                         double alpha_scale, double bound_lo, double bound_hi, double* out);

#ifdef __cplusplus
}
#endif

#endif /* RISKRANK_H */
