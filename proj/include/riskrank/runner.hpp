#pragma once

#include <string>

#include <json.hpp>

#include "riskrank/corpus.hpp"

namespace riskrank::run {

// Fills every field the command understands with its default, overlaying
// `overrides`. The result is what gets echoed to <out_dir>/config.json.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& overrides);

// Each command writes its artifacts plus the resolved config echo under
// out_dir. Outputs are byte-identical across runs and parallelism degrees
// for fixed (inputs, config).
void cmd_select(const Corpus& corpus, const nlohmann::json& config, const std::string& out_dir);
void cmd_evaluate(const Corpus& corpus, const nlohmann::json& config, const std::string& out_dir);
void cmd_calibrate(const Corpus& corpus, const nlohmann::json& config, const std::string& out_dir);
void cmd_simulate(const nlohmann::json& config, const std::string& out_dir);

// Returns the number of tolerance violations (0 means verified).
int cmd_verify(const nlohmann::json& config, const std::string& out_dir);

}  // namespace riskrank::run
