#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chronoqa/params.hpp"

namespace chronoqa {

// Checkpoint file layout:
//   [u64 little-endian manifest byte count][manifest JSON][payload]
// The manifest records names, shapes, dtype, byte offsets, the effective
// config, the seed, and the vocabularies; the payload is the concatenation of
// all parameter tensors as little-endian 64-bit floats. Save/load round-trips
// are bitwise exact.
struct CheckpointMeta {
    uint64_t seed = 0;
    std::string config_json = "{}";  // effective config echo, as serialized JSON
    std::vector<std::string> token_vocab;
    std::vector<std::string> entity_vocab;
    std::vector<std::string> relation_vocab;
    std::vector<int> time_vocab;  // years in timestamp-id order
};

struct LoadedTensor {
    std::string name;
    Tensor value;
};

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::vector<LoadedTensor> tensors;

    const Tensor& require(const std::string& name) const;
    bool contains(const std::string& name) const;
};

void save_checkpoint(const ParamStore& store, const CheckpointMeta& meta,
                     const std::string& path);

// Throws CorruptionError on any manifest/payload disagreement (bad JSON,
// offset mismatch, truncated payload).
LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies every tensor of `loaded` into the same-named parameter of `store`.
// Shape mismatches and missing parameters raise CorruptionError.
void restore_params(ParamStore& store, const LoadedCheckpoint& loaded);

}  // namespace chronoqa
