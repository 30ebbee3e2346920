#include "riskrank/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "riskrank/errors.hpp"

namespace riskrank {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

[[noreturn]] void fail_line(std::size_t line_no, const std::string& msg) {
  throw InputError("line " + std::to_string(line_no) + ": " + msg);
}

double read_number(const ordered_json& j, std::size_t line_no, const char* field) {
  if (!j.is_number()) fail_line(line_no, std::string(field) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail_line(line_no, std::string(field) + " must be finite");
  return v;
}

SampleSet read_sample_set(const ordered_json& arr, std::size_t line_no, const std::string& where,
                          Bounds bounds, std::optional<double> truncate_l) {
  if (!arr.is_array()) fail_line(line_no, where + " must be an array of numbers");
  SampleSet set;
  set.values.reserve(arr.size());
  for (const auto& item : arr) {
    double v = read_number(item, line_no, where.c_str());
    if (truncate_l) v = std::clamp(v, -*truncate_l, *truncate_l);
    if (v < bounds.lo || v > bounds.hi)
      fail_line(line_no, where + ": value " + format_double(v) + " outside bounds [" +
                             format_double(bounds.lo) + ", " + format_double(bounds.hi) + "]");
    set.values.push_back(v);
  }
  if (set.values.empty()) fail_line(line_no, where + ": sample set must be non-empty");
  return set;
}

std::map<std::string, SampleSet> read_sample_map(const ordered_json& obj, std::size_t line_no,
                                                 const std::string& where, Bounds bounds,
                                                 std::optional<double> truncate_l,
                                                 std::vector<std::string>* first_seen_order) {
  if (!obj.is_object()) fail_line(line_no, where + " must map scorer ids to arrays");
  std::map<std::string, SampleSet> out;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    out[it.key()] = read_sample_set(it.value(), line_no, where + "[" + it.key() + "]", bounds, truncate_l);
    if (first_seen_order) first_seen_order->push_back(it.key());
  }
  if (out.empty()) fail_line(line_no, where + " must contain at least one scorer");
  return out;
}

void write_sample_map(std::ostream& out, const std::map<std::string, SampleSet>& samples,
                      const std::vector<std::string>& scorer_order) {
  out << '{';
  bool first = true;
  for (const auto& scorer : scorer_order) {
    const auto it = samples.find(scorer);
    if (it == samples.end()) continue;
    if (!first) out << ',';
    first = false;
    out << quote(scorer) << ":[";
    for (std::size_t i = 0; i < it->second.values.size(); ++i) {
      if (i) out << ',';
      out << format_double(it->second.values[i]);
    }
    out << ']';
  }
  out << '}';
}

std::set<std::string> key_set(const std::map<std::string, SampleSet>& m) {
  std::set<std::string> s;
  for (const auto& [k, v] : m) s.insert(k);
  return s;
}

}  // namespace

bool Corpus::operator==(const Corpus& other) const {
  return pools == other.pools && scorer_ids == other.scorer_ids && bounds.lo == other.bounds.lo &&
         bounds.hi == other.bounds.hi && meta == other.meta;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

Corpus parse_corpus(std::istream& in, Bounds bounds, std::optional<double> truncate_l) {
  if (!(bounds.lo < bounds.hi)) throw ConfigError("corpus bounds must satisfy lo < hi");
  if (truncate_l && !(*truncate_l > 0.0)) throw ConfigError("truncate_l must be positive");
  Corpus corpus;
  corpus.bounds = bounds;
  corpus.meta.truncate_l = truncate_l;
  std::set<std::string> seen_prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) fail_line(line_no, "record must be a JSON object");
    if (!record.contains("prompt_id") || !record["prompt_id"].is_string())
      fail_line(line_no, "missing string field prompt_id");
    CandidatePool pool;
    pool.prompt_id = record["prompt_id"].get<std::string>();
    if (!seen_prompts.insert(pool.prompt_id).second)
      fail_line(line_no, "duplicate prompt_id " + quote(pool.prompt_id));
    if (!record.contains("candidates") || !record["candidates"].is_array())
      fail_line(line_no, "missing array field candidates");
    std::set<std::string> seen_candidates;
    for (const auto& cj : record["candidates"]) {
      if (!cj.is_object()) fail_line(line_no, "candidate must be an object");
      Candidate cand;
      if (!cj.contains("candidate_id") || !cj["candidate_id"].is_string())
        fail_line(line_no, "candidate missing string field candidate_id");
      cand.id = cj["candidate_id"].get<std::string>();
      if (!seen_candidates.insert(cand.id).second)
        fail_line(line_no, "duplicate candidate_id " + quote(cand.id) + " in pool " +
                               quote(pool.prompt_id));
      if (!cj.contains("samples")) fail_line(line_no, "candidate " + quote(cand.id) + " missing samples");
      std::vector<std::string>* order_sink = corpus.scorer_ids.empty() ? &corpus.scorer_ids : nullptr;
      cand.samples = read_sample_map(cj["samples"], line_no, "samples", bounds, truncate_l, order_sink);
      if (cj.contains("eval_samples"))
        cand.eval_samples =
            read_sample_map(cj["eval_samples"], line_no, "eval_samples", bounds, truncate_l, nullptr);
      if (cj.contains("ref_loglik_per_token"))
        cand.ref_loglik_per_token = read_number(cj["ref_loglik_per_token"], line_no, "ref_loglik_per_token");
      if (cj.contains("error_score")) {
        const double e = read_number(cj["error_score"], line_no, "error_score");
        if (e < 0.0 || e > 1.0) fail_line(line_no, "error_score must lie in [0,1]");
        cand.error_score = e;
      }
      if (cj.contains("token_length")) {
        if (!cj["token_length"].is_number_integer() || cj["token_length"].get<std::int64_t>() < 0)
          fail_line(line_no, "token_length must be a non-negative integer");
        cand.token_length = cj["token_length"].get<std::int64_t>();
      }
      if (cj.contains("text")) {
        if (!cj["text"].is_string()) fail_line(line_no, "text must be a string");
        cand.text = cj["text"].get<std::string>();
      }
      if (cj.contains("source")) {
        if (!cj["source"].is_string()) fail_line(line_no, "source must be a string");
        cand.source = cj["source"].get<std::string>();
      }
      pool.candidates.push_back(std::move(cand));
    }
    if (pool.candidates.empty()) fail_line(line_no, "pool " + quote(pool.prompt_id) + " has no candidates");
    const std::set<std::string> canonical(corpus.scorer_ids.begin(), corpus.scorer_ids.end());
    for (const auto& cand : pool.candidates) {
      if (key_set(cand.samples) != canonical)
        fail_line(line_no, "scorer set mismatch for candidate " + quote(cand.id) + " in pool " +
                               quote(pool.prompt_id));
      if (!cand.eval_samples.empty() && key_set(cand.eval_samples) != canonical)
        fail_line(line_no, "eval_samples scorer set mismatch for candidate " + quote(cand.id) +
                               " in pool " + quote(pool.prompt_id));
    }
    corpus.pools.push_back(std::move(pool));
  }
  if (corpus.pools.empty()) throw InputError("corpus has no prompts");
  return corpus;
}

Corpus ingest_corpus(const std::string& path, Bounds bounds, std::optional<double> truncate_l) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return parse_corpus(in, bounds, truncate_l);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& pool : corpus.pools) {
    out << "{\"prompt_id\":" << quote(pool.prompt_id) << ",\"candidates\":[";
    for (std::size_t ci = 0; ci < pool.candidates.size(); ++ci) {
      const Candidate& cand = pool.candidates[ci];
      if (ci) out << ',';
      out << "{\"candidate_id\":" << quote(cand.id) << ",\"samples\":";
      write_sample_map(out, cand.samples, corpus.scorer_ids);
      if (!cand.eval_samples.empty()) {
        out << ",\"eval_samples\":";
        write_sample_map(out, cand.eval_samples, corpus.scorer_ids);
      }
      if (cand.ref_loglik_per_token)
        out << ",\"ref_loglik_per_token\":" << format_double(*cand.ref_loglik_per_token);
      if (cand.error_score) out << ",\"error_score\":" << format_double(*cand.error_score);
      if (cand.token_length) out << ",\"token_length\":" << *cand.token_length;
      if (cand.text) out << ",\"text\":" << quote(*cand.text);
      if (cand.source) out << ",\"source\":" << quote(*cand.source);
      out << '}';
    }
    out << "]}\n";
  }
}

void write_corpus_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open output file: " + path);
  write_corpus(corpus, out);
}

SplitView split_select_eval(const CandidatePool& pool, const SplitPolicy& policy) {
  if (pool.candidates.empty()) throw InputError("cannot split an empty pool");
  SplitPolicy::Mode mode = policy.mode;
  if (mode == SplitPolicy::Mode::Auto) {
    const bool has_eval = std::all_of(pool.candidates.begin(), pool.candidates.end(),
                                      [](const Candidate& c) { return !c.eval_samples.empty(); });
    mode = has_eval ? SplitPolicy::Mode::EvalField : SplitPolicy::Mode::IndexSplit;
  }
  SplitView view;
  view.mode = mode;
  view.selection = pool;
  view.evaluation = pool;
  switch (mode) {
    case SplitPolicy::Mode::None:
      view.evaluation.candidates.clear();
      view.has_evaluation = false;
      for (auto& cand : view.selection.candidates) cand.eval_samples.clear();
      return view;
    case SplitPolicy::Mode::EvalField: {
      for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        const Candidate& cand = pool.candidates[i];
        if (cand.eval_samples.empty())
          throw InputError("candidate " + cand.id + " in pool " + pool.prompt_id +
                           " has no eval_samples for an eval-field split");
        view.selection.candidates[i].eval_samples.clear();
        view.evaluation.candidates[i].samples = cand.eval_samples;
        view.evaluation.candidates[i].eval_samples.clear();
      }
      return view;
    }
    case SplitPolicy::Mode::IndexSplit: {
      if (!(policy.select_fraction > 0.0 && policy.select_fraction < 1.0))
        throw ConfigError("index split requires select_fraction in (0,1)");
      for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        for (const auto& [scorer, set] : pool.candidates[i].samples) {
          const std::size_t n = set.values.size();
          if (n < 2)
            throw InputError("candidate " + pool.candidates[i].id + " scorer " + scorer +
                             " has n=1; cannot index-split");
          std::size_t n_sel =
              static_cast<std::size_t>(std::llround(policy.select_fraction * static_cast<double>(n)));
          n_sel = std::clamp<std::size_t>(n_sel, 1, n - 1);
          auto& sel_set = view.selection.candidates[i].samples[scorer];
          auto& eval_set = view.evaluation.candidates[i].samples[scorer];
          sel_set.values.assign(set.values.begin(), set.values.begin() + static_cast<long>(n_sel));
          eval_set.values.assign(set.values.begin() + static_cast<long>(n_sel), set.values.end());
          if (i == 0 && view.selection_indices.empty()) {
            for (std::size_t j = 0; j < n_sel; ++j) view.selection_indices.push_back(j);
            for (std::size_t j = n_sel; j < n; ++j) view.evaluation_indices.push_back(j);
          }
        }
        view.selection.candidates[i].eval_samples.clear();
        view.evaluation.candidates[i].eval_samples.clear();
      }
      return view;
    }
    case SplitPolicy::Mode::Auto:
      break;
  }
  throw ConfigError("unresolved split mode");
}

}  // namespace riskrank
