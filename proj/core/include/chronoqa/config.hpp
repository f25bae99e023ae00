#pragma once

#include <cstdint>
#include <string>

#include "chronoqa/pipeline.hpp"
#include "chronoqa/synth.hpp"
#include "chronoqa/tkge.hpp"

namespace chronoqa {

// Operator-facing configuration: one JSON file covering all pipeline stages,
// overridable by CLI flags. The single top-level seed drives every stage
// unless a stage section sets its own.
struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir = "out";
    WorldConfig world;
    PretrainConfig pretrain;
    TrainConfig train;

    struct Paths {
        std::string kg;
        std::string questions_train;
        std::string questions_dev;
        std::string questions_test;
        std::string pretrained_checkpoint;
        std::string model_checkpoint;
    } paths;
};

// Built-in defaults with stage seeds tied to the top-level seed.
RunConfig default_run_config();

// Parses a JSON config file over the defaults. Unknown keys raise
// ContractError; malformed JSON raises ParseError.
RunConfig load_run_config(const std::string& path);

// Serialized effective configuration (stable key order).
std::string run_config_to_json(const RunConfig& config);

// Echoes the effective config into `dir`/effective_config.json.
void write_effective_config(const RunConfig& config, const std::string& dir);

}  // namespace chronoqa
