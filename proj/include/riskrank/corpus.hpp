#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskrank/risk.hpp"

namespace riskrank {

// Ordered scalar score samples for one (prompt, candidate, scorer) triple.
// Sample order is significant: indices are sample identity, which keeps
// index splits and golden files reproducible.
struct SampleSet {
  std::vector<double> values;

  bool operator==(const SampleSet&) const = default;
};

struct Candidate {
  std::string id;
  std::map<std::string, SampleSet> samples;       // scorer id -> selection samples
  std::map<std::string, SampleSet> eval_samples;  // optional held-out samples
  std::optional<double> ref_loglik_per_token;     // nats/token under a reference policy
  std::optional<double> error_score;              // atypicality score in [0,1]
  std::optional<std::int64_t> token_length;
  std::optional<std::string> text;
  std::optional<std::string> source;  // free-form provenance tag, no semantics

  bool operator==(const Candidate&) const = default;
};

struct CandidatePool {
  std::string prompt_id;
  std::vector<Candidate> candidates;

  bool operator==(const CandidatePool&) const = default;
};

struct IngestMeta {
  int n_aug = 0;  // informational only
  std::optional<double> truncate_l;

  bool operator==(const IngestMeta&) const = default;
};

struct Corpus {
  std::vector<CandidatePool> pools;
  std::vector<std::string> scorer_ids;  // canonical order, shared by every pool
  Bounds bounds;
  IngestMeta meta;

  bool operator==(const Corpus& other) const;
};

// Line-delimited JSON, one object per prompt. Scores are clipped to
// [-truncate_l, truncate_l] when set, then validated against bounds.
// Errors carry 1-based line numbers.
Corpus ingest_corpus(const std::string& path, Bounds bounds,
                     std::optional<double> truncate_l = std::nullopt);
Corpus parse_corpus(std::istream& in, Bounds bounds,
                    std::optional<double> truncate_l = std::nullopt);

void write_corpus(const Corpus& corpus, std::ostream& out);
void write_corpus_file(const Corpus& corpus, const std::string& path);

// Doubles rendered with 17 significant digits, locale-independent.
std::string format_double(double v);

struct SplitPolicy {
  enum class Mode {
    Auto,       // EvalField when eval samples exist, otherwise IndexSplit
    EvalField,  // selection = samples, evaluation = eval_samples
    IndexSplit, // prefix/suffix split of each sample vector
    None,       // selection = samples, no evaluation view
  };
  Mode mode = Mode::Auto;
  double select_fraction = 0.5;  // IndexSplit: share of samples kept for selection
};

// Disjoint selection/evaluation views of one pool. For IndexSplit the two
// index vectors partition 0..n-1 of the original sample vectors; for
// EvalField disjointness comes from the two fields themselves.
struct SplitView {
  CandidatePool selection;
  CandidatePool evaluation;
  SplitPolicy::Mode mode = SplitPolicy::Mode::EvalField;
  std::vector<std::size_t> selection_indices;
  std::vector<std::size_t> evaluation_indices;
  bool has_evaluation = true;
};

SplitView split_select_eval(const CandidatePool& pool, const SplitPolicy& policy);

}  // namespace riskrank
