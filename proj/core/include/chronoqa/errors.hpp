#pragma once

#include <stdexcept>
#include <string>

namespace chronoqa {

// Error taxonomy. Every throwing operation names one of these so callers
// (and the CLI exit-code mapping) can tell configuration mistakes apart
// from data corruption and numeric failures.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (TSV/JSONL); message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

// Id or name not present in a vocabulary.
struct LookupError : Error {
    using Error::Error;
};

// Tensor shape mismatch; message names the op and the offending shapes.
struct DimensionError : Error {
    using Error::Error;
};

// API precondition violated (non-scalar loss, odd complex dim, ...).
struct ContractError : Error {
    using Error::Error;
};

// Numeric failure during training (NaN gradients or loss).
struct TrainingError : Error {
    using Error::Error;
};

// Checkpoint manifest/payload disagreement.
struct CorruptionError : Error {
    using Error::Error;
};

// Synthetic world or question generation cannot satisfy the config.
struct GenerationError : Error {
    using Error::Error;
};

// Invalid training data (e.g. a question with no positive label).
struct DataError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace chronoqa
