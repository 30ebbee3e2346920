#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>

#include "riskrank/corpus.hpp"
#include "riskrank/errors.hpp"
#include "riskrank/rng.hpp"

using namespace riskrank;

namespace {

Corpus parse_text(const std::string& text, Bounds bounds = {-10, 10},
                  std::optional<double> truncate_l = std::nullopt) {
  std::istringstream in(text);
  return parse_corpus(in, bounds, truncate_l);
}

std::string error_message(const std::string& text, Bounds bounds = {-10, 10},
                          std::optional<double> truncate_l = std::nullopt) {
  try {
    parse_text(text, bounds, truncate_l);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

Corpus random_corpus(std::uint64_t seed) {
  Rng rng(seed);
  Corpus corpus;
  corpus.bounds = {-10, 10};
  corpus.scorer_ids = {"rm1", "rm2"};
  const int pools = 3 + static_cast<int>(rng.below(3));
  for (int p = 0; p < pools; ++p) {
    CandidatePool pool;
    pool.prompt_id = "p" + std::to_string(p);
    const int k = 1 + static_cast<int>(rng.below(4));
    for (int c = 0; c < k; ++c) {
      Candidate cand;
      cand.id = "c" + std::to_string(c);
      const bool with_eval = rng.next_double() < 0.5;
      for (const auto& scorer : corpus.scorer_ids) {
        SampleSet set;
        const int n = 1 + static_cast<int>(rng.below(6));
        for (int i = 0; i < n; ++i) set.values.push_back(rng.uniform(-10, 10));
        cand.samples[scorer] = set;
        if (with_eval) {
          SampleSet ev;
          for (int i = 0; i < 3; ++i) ev.values.push_back(rng.uniform(-10, 10));
          cand.eval_samples[scorer] = ev;
        }
      }
      if (rng.next_double() < 0.5) cand.ref_loglik_per_token = rng.uniform(-5, 0);
      if (rng.next_double() < 0.5) cand.error_score = rng.next_double();
      if (rng.next_double() < 0.5) cand.token_length = static_cast<std::int64_t>(rng.below(500));
      if (rng.next_double() < 0.3) cand.text = "response \"quoted\" #" + std::to_string(c);
      if (rng.next_double() < 0.3) cand.source = "human";
      pool.candidates.push_back(std::move(cand));
    }
    corpus.pools.push_back(std::move(pool));
  }
  return corpus;
}

}  // namespace

TEST_CASE("basic ingestion") {
  const std::string text =
      R"({"prompt_id":"p1","candidates":[{"candidate_id":"a","samples":{"rm1":[1,2]}},{"candidate_id":"b","samples":{"rm1":[3.5]}}]})"
      "\n";
  const Corpus corpus = parse_text(text);
  REQUIRE(corpus.pools.size() == 1);
  CHECK(corpus.pools[0].candidates.size() == 2);  // K = 2
  CHECK(corpus.scorer_ids == std::vector<std::string>{"rm1"});
  CHECK(corpus.pools[0].candidates[0].samples.at("rm1").values == std::vector<double>{1, 2});
}

TEST_CASE("truncation clips before validation") {
  const std::string text =
      R"({"prompt_id":"p1","candidates":[{"candidate_id":"a","samples":{"rm1":[12.3,-14.0]}}]})"
      "\n";
  const Corpus corpus = parse_text(text, {-10, 10}, 10.0);
  CHECK(corpus.pools[0].candidates[0].samples.at("rm1").values == std::vector<double>{10.0, -10.0});
  // without truncation the same record is rejected
  CHECK(error_message(text).find("outside bounds") != std::string::npos);
}

TEST_CASE("clipping never rejects when the clip range sits inside the bounds") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    std::ostringstream line;
    line << R"({"prompt_id":"p","candidates":[{"candidate_id":"a","samples":{"rm1":[)";
    const int n = 1 + static_cast<int>(rng.below(6));
    for (int j = 0; j < n; ++j) {
      if (j) line << ',';
      line << format_double(rng.uniform(-1e6, 1e6));
    }
    line << "]}}]}\n";
    CHECK_NOTHROW(parse_text(line.str(), {-10, 10}, 10.0));
  }
}

TEST_CASE("scorer set mismatch") {
  const std::string text =
      R"({"prompt_id":"p1","candidates":[{"candidate_id":"a","samples":{"rm1":[1],"rm2":[2]}},{"candidate_id":"b","samples":{"rm1":[1]}}]})"
      "\n";
  const std::string msg = error_message(text);
  CHECK(msg.find("scorer set mismatch") != std::string::npos);
  CHECK(msg.find("line 1") != std::string::npos);
}

TEST_CASE("malformed line reports its number") {
  const std::string good =
      R"({"prompt_id":"p1","candidates":[{"candidate_id":"a","samples":{"rm1":[1]}}]})";
  const std::string msg = error_message(good + "\n{not json\n");
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("malformed JSON") != std::string::npos);
}

TEST_CASE("empty pool and empty sample set are rejected") {
  CHECK(error_message(R"({"prompt_id":"p1","candidates":[]})"
                      "\n")
            .find("no candidates") != std::string::npos);
  CHECK(error_message(
            R"({"prompt_id":"p1","candidates":[{"candidate_id":"a","samples":{"rm1":[]}}]})"
            "\n")
            .find("non-empty") != std::string::npos);
}

TEST_CASE("optional field validation") {
  CHECK(error_message(
            R"({"prompt_id":"p","candidates":[{"candidate_id":"a","samples":{"r":[1]},"error_score":1.5}]})"
            "\n")
            .find("error_score") != std::string::npos);
  CHECK(error_message(
            R"({"prompt_id":"p","candidates":[{"candidate_id":"a","samples":{"r":[1]},"token_length":-3}]})"
            "\n")
            .find("token_length") != std::string::npos);
  CHECK(error_message(R"({"prompt_id":"p","candidates":[{"candidate_id":"a","samples":{"r":[1]}}]})"
                      "\n"
                      R"({"prompt_id":"p","candidates":[{"candidate_id":"a","samples":{"r":[1]}}]})"
                      "\n")
            .find("duplicate prompt_id") != std::string::npos);
}

TEST_CASE("round trip is field-for-field idempotent") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    const Corpus corpus = random_corpus(seed);
    std::ostringstream out;
    write_corpus(corpus, out);
    const Corpus back = parse_text(out.str());
    CHECK(back == corpus);
    // a second cycle is byte-identical
    std::ostringstream out2;
    write_corpus(back, out2);
    CHECK(out.str() == out2.str());
  }
}

TEST_CASE("17-significant-digit serialization round-trips exactly") {
  const double tricky = 0.1 + 0.2;  // 0.30000000000000004
  CHECK(format_double(tricky) == "0.30000000000000004");
  CHECK(std::stod(format_double(tricky)) == tricky);
  CHECK(format_double(10.0) == "10");
  const double pi_ish = 3.141592653589793;
  CHECK(std::stod(format_double(pi_ish)) == pi_ish);
}

TEST_CASE("split with eval field") {
  CandidatePool pool;
  pool.prompt_id = "p";
  Candidate cand;
  cand.id = "a";
  cand.samples["rm"] = SampleSet{{1, 2, 3}};
  cand.eval_samples["rm"] = SampleSet{{4, 5}};
  pool.candidates.push_back(cand);

  const SplitView view = split_select_eval(pool, {SplitPolicy::Mode::Auto, 0.5});
  CHECK(view.mode == SplitPolicy::Mode::EvalField);
  CHECK(view.selection.candidates[0].samples.at("rm").values == std::vector<double>{1, 2, 3});
  CHECK(view.evaluation.candidates[0].samples.at("rm").values == std::vector<double>{4, 5});
  CHECK(view.has_evaluation);
}

TEST_CASE("index split halves the samples disjointly") {
  CandidatePool pool;
  pool.prompt_id = "p";
  Candidate cand;
  cand.id = "a";
  cand.samples["rm"] = SampleSet{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  pool.candidates.push_back(cand);

  const SplitView view = split_select_eval(pool, {SplitPolicy::Mode::IndexSplit, 0.5});
  CHECK(view.selection.candidates[0].samples.at("rm").values ==
        std::vector<double>{0, 1, 2, 3, 4});
  CHECK(view.evaluation.candidates[0].samples.at("rm").values ==
        std::vector<double>{5, 6, 7, 8, 9});
  // index bookkeeping: the two index sets partition 0..n-1
  std::vector<std::size_t> all = view.selection_indices;
  all.insert(all.end(), view.evaluation_indices.begin(), view.evaluation_indices.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  for (std::size_t i : view.selection_indices)
    for (std::size_t j : view.evaluation_indices) CHECK(i != j);
}

TEST_CASE("index split with a single sample fails") {
  CandidatePool pool;
  pool.prompt_id = "p";
  Candidate cand;
  cand.id = "a";
  cand.samples["rm"] = SampleSet{{7}};
  pool.candidates.push_back(cand);
  CHECK_THROWS_AS(split_select_eval(pool, {SplitPolicy::Mode::IndexSplit, 0.5}), InputError);
}

TEST_CASE("auto split without eval samples falls back to index") {
  CandidatePool pool;
  pool.prompt_id = "p";
  Candidate cand;
  cand.id = "a";
  cand.samples["rm"] = SampleSet{{1, 2, 3, 4}};
  pool.candidates.push_back(cand);
  const SplitView view = split_select_eval(pool, {SplitPolicy::Mode::Auto, 0.5});
  CHECK(view.mode == SplitPolicy::Mode::IndexSplit);
  CHECK(view.selection.candidates[0].samples.at("rm").values.size() == 2);
  CHECK(view.evaluation.candidates[0].samples.at("rm").values.size() == 2);
}
