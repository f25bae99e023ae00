#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chronoqa/question.hpp"
#include "chronoqa/tkg.hpp"

namespace chronoqa {

struct WorldConfig {
    uint64_t seed = 7;
    int n_people = 40;
    int n_positions = 6;
    int year_min = 1800;
    int year_max = 1900;
    // Target mean tenure length in years; each position's timeline is cut
    // into round(range / mean_tenure) consecutive tenures that share boundary
    // years, so successive holders overlap at the handover year.
    double mean_tenure = 2.5;
    int questions_per_template = 400;
};

// Deterministic synthetic world: people hold positions over gap-free
// boundary-sharing tenures covering [year_min, year_max]. Throws
// GenerationError on infeasible configs (more positions than the name pool,
// fewer than two people, tenure count exceeding the year range, ...).
TemporalKG generate_world(const WorldConfig& config);

struct StructuredQuery {
    enum class Kind { HolderAt, HolderWhile, Successor, TenureStart, TenureEnd };
    Kind kind = Kind::HolderAt;
    EntityId position = -1;
    EntityId person = -1;  // unused by HolderAt
    Year year = 0;         // HolderAt only
};

const char* query_kind_name(StructuredQuery::Kind kind);

struct OracleResult {
    std::vector<Answer> answers;  // sorted by id, deduplicated
    bool answer_is_timestamp = false;
};

// Brute-force interval-logic oracle, computed by exhaustive scans over
// kg.facts():
//   HolderAt     holders of the position whose interval contains the year
//   HolderWhile  holders of the position whose interval overlaps any tenure
//                of the other person (the other person excluded)
//   Successor    per tenure of the person in the position: holders starting
//                exactly at its end year, or at the minimal later start
//   TenureStart / TenureEnd  the person's tenure endpoint years (timestamps)
// An empty answer set signals an unanswerable query (the generator discards
// those). Throws LookupError when the query arguments are not in the KG.
OracleResult oracle_answer(const TemporalKG& kg, const StructuredQuery& query);

struct GeneratedQuestion {
    QuestionInstance instance;
    StructuredQuery query;
    std::string tuple_key;  // template + canonical arguments (drives the split)
};

// Instantiates each template with valid argument tuples (shuffled, cycled
// when the requested count exceeds the distinct tuple space), renders the
// fixed surface form with span annotations, and attaches gold answers
// computed from per-position timeline sequences, independently of
// oracle_answer's fact scans. Deterministic per seed. Throws GenerationError
// naming the template when it has no valid tuples.
std::vector<GeneratedQuestion> generate_questions(const TemporalKG& kg,
                                                  const WorldConfig& config);

struct SynthDataset {
    std::vector<QuestionInstance> train;
    std::vector<QuestionInstance> dev;
    std::vector<QuestionInstance> test;
};

// 70/10/20 split by a stable hash of the argument tuple, so duplicated
// tuples never straddle splits.
SynthDataset split_dataset(const std::vector<GeneratedQuestion>& questions);

}  // namespace chronoqa
