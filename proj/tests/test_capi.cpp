#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "riskrank.h"

namespace {

const std::string kCorpusPath = std::string(RISKRANK_GOLDEN_DIR) + "/tiny_corpus.jsonl";

std::string temp_dir(const char* tag) {
  const auto dir = std::filesystem::temp_directory_path() /
                   (std::string("riskrank_capi_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("corpus lifecycle and error codes") {
  rr_corpus* corpus = nullptr;
  CHECK(rr_corpus_open("/definitely/missing.jsonl", 0, 10, nullptr, &corpus) == RR_INPUT_ERROR);
  CHECK(corpus == nullptr);
  CHECK(std::string(rr_last_error()).find("missing.jsonl") != std::string::npos);

  REQUIRE(rr_corpus_open(kCorpusPath.c_str(), 0, 10, nullptr, &corpus) == RR_OK);
  REQUIRE(corpus != nullptr);
  CHECK(rr_corpus_prompt_count(corpus) == 3);
  CHECK(rr_corpus_scorer_count(corpus) == 1);
  rr_corpus_close(corpus);
  rr_corpus_close(nullptr);  // harmless
}

TEST_CASE("select via the C API is deterministic") {
  rr_corpus* corpus = nullptr;
  REQUIRE(rr_corpus_open(kCorpusPath.c_str(), 0, 10, nullptr, &corpus) == RR_OK);
  const std::string config =
      R"({"seed": 7, "rules": ["mean", "entropic", {"rule": "eps", "epsilon": 0.25}]})";
  const std::string dir_a = temp_dir("sel_a");
  const std::string dir_b = temp_dir("sel_b");
  CHECK(rr_run_select(corpus, config.c_str(), dir_a.c_str()) == RR_OK);
  CHECK(rr_run_select(corpus, config.c_str(), dir_b.c_str()) == RR_OK);
  CHECK(slurp(dir_a + "/selections.jsonl") == slurp(dir_b + "/selections.jsonl"));
  CHECK(slurp(dir_a + "/config.json") == slurp(dir_b + "/config.json"));

  // 3 prompts x 3 rules
  const std::string body = slurp(dir_a + "/selections.jsonl");
  CHECK(std::count(body.begin(), body.end(), '\n') == 9);

  CHECK(rr_run_select(corpus, R"({"rules": ["no_such_rule"]})", dir_a.c_str()) ==
        RR_CONFIG_ERROR);
  rr_corpus_close(corpus);
}

TEST_CASE("evaluate via the C API") {
  rr_corpus* corpus = nullptr;
  REQUIRE(rr_corpus_open(kCorpusPath.c_str(), 0, 10, nullptr, &corpus) == RR_OK);
  const std::string dir = temp_dir("eval");
  REQUIRE(rr_run_select(corpus, R"({"seed": 7, "rules": ["mean", "entropic"]})", dir.c_str()) ==
          RR_OK);
  const std::string eval_config =
      std::string(R"({"selections": ")") + dir + R"(/selections.jsonl"})";
  CHECK(rr_run_evaluate(corpus, eval_config.c_str(), dir.c_str()) == RR_OK);
  const std::string csv = slurp(dir + "/report.csv");
  CHECK(csv.rfind("method,reward,risk,tradeoff,cvar10,win,tie,loss,mean_delta\n", 0) == 0);
  CHECK(csv.find("entropic,") != std::string::npos);

  CHECK(rr_run_evaluate(corpus, R"({"selections": "/missing/file.jsonl"})", dir.c_str()) ==
        RR_INPUT_ERROR);
  rr_corpus_close(corpus);
}

TEST_CASE("simulate and verify via the C API") {
  const std::string dir = temp_dir("sim");
  const std::string config = R"({
    "seed": 5,
    "scenario": {"num_prompts": 4, "candidates_per_prompt": 3, "samples_per_candidate": 4,
                  "eval_samples_per_candidate": 4},
    "simulate": {"coverage_trials": 50}
  })";
  CHECK(rr_run_simulate(config.c_str(), dir.c_str()) == RR_OK);
  CHECK(std::filesystem::exists(dir + "/corpus.jsonl"));
  CHECK(std::filesystem::exists(dir + "/ground_truth.jsonl"));
  CHECK(slurp(dir + "/coverage.json").find("\"rate\"") != std::string::npos);

  const std::string vdir = temp_dir("verify");
  const std::string vconfig =
      R"({"verify": {"cases_kl": 50, "cases_chi2": 20, "cases_lambda_rho": 20, "cases_scorer": 50}})";
  CHECK(rr_run_verify(vconfig.c_str(), vdir.c_str()) == RR_OK);
  CHECK(slurp(vdir + "/verify.json").find("\"ok\": true") != std::string::npos);
}

TEST_CASE("scalar kernels") {
  const double zero_one[] = {0.0, 1.0};
  double out = 0.0;
  REQUIRE(rr_entropic_value(zero_one, 2, 1.0, &out) == RR_OK);
  CHECK(out == doctest::Approx(0.3798854930417225).epsilon(1e-12));
  REQUIRE(rr_risk_premium(zero_one, 2, 1.0, &out) == RR_OK);
  CHECK(out == doctest::Approx(0.5 - 0.3798854930417225).epsilon(1e-12));
  REQUIRE(rr_empirical_cvar(zero_one, 2, 0.5, &out) == RR_OK);
  CHECK(out == doctest::Approx(0.0));
  int tight = 0;
  REQUIRE(rr_chi2_robust_mean(zero_one, 2, 0.25, &out, &tight) == RR_OK);
  CHECK(out == doctest::Approx(0.25));
  CHECK(tight == 1);
  REQUIRE(rr_soft_worst_case(zero_one, 2, 1000.0, &out) == RR_OK);
  CHECK(out == doctest::Approx(0.0).epsilon(1e-3));
  const double elevens[] = {5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5};
  REQUIRE(rr_lcb_bounded(elevens, 11, 1, 0.1, 1.0, 0.0, 10.0, &out) == RR_OK);
  CHECK(out == doctest::Approx(-1.9900419716259794).epsilon(1e-9));

  CHECK(rr_entropic_value(zero_one, 2, -1.0, &out) == RR_CONFIG_ERROR);
  CHECK(rr_entropic_value(nullptr, 2, 1.0, &out) == RR_CONFIG_ERROR);
  CHECK(rr_empirical_cvar(zero_one, 0, 0.5, &out) == RR_CONFIG_ERROR);
}
