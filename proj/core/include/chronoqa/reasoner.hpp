#pragma once

#include <vector>

#include "chronoqa/params.hpp"
#include "chronoqa/question.hpp"
#include "chronoqa/rng.hpp"
#include "chronoqa/tape.hpp"
#include "chronoqa/tkg.hpp"

namespace chronoqa {

struct ReasonerModel {
    Param* p_e = nullptr;             // D x D entity-scoring projection
    Param* p_t = nullptr;             // D x D time-scoring projection
    Param* w_type = nullptr;          // 1 x D answer-type projection
    Param* default_entity = nullptr;  // 1 x D fallback for zero-entity questions

    static ReasonerModel create(ParamStore& store, int d, Rng& rng, double init_stddev = 0.05);
};

struct AttentionResult {
    Var pooled;   // D x 1 convex combination
    Var weights;  // 1 x k softmax weights
};

// Softmax attention keyed by the question vector: weight_i proportional to
// exp(q . emb_i), pooled = sum_i weight_i * emb_i. `embeddings` is k x D with
// k >= 1 (ContractError otherwise). Entity-aware and time-aware attention are
// this same mechanism over grounded-entity and candidate-timestamp rows.
AttentionResult attention_pool(Tape& tape, Var query_col, Var embeddings);

// Entity scores over a candidate table (n x D):
// entry(c) = Re(<e_att, P_E q . t_att, conj(cand_c)>).
Var score_entities(Tape& tape, const ReasonerModel& rsn, Var q, Var e_att, Var t_att,
                   Var candidate_table);

// Timestamp scores over a candidate table (n x D):
// entry(c) = Re(<e_att, P_T q . t_c, conj(e_att)>).
Var score_times(Tape& tape, const ReasonerModel& rsn, Var q, Var e_att, Var candidate_table);

// p_time = sigmoid(W_type q), a 1 x 1 node.
Var atd(Tape& tape, const ReasonerModel& rsn, Var q);

enum class FilterMode { Off, Hard };

FilterMode filter_mode_from_name(const std::string& name);
const char* filter_mode_name(FilterMode mode);

// Raw per-candidate scores extracted from a forward pass. Entity indices are
// entity ids; time indices are timestamp ids.
struct CandidateScores {
    std::vector<double> entity_scores;
    std::vector<double> time_scores;
    double p_time = 0.5;
};

struct Prediction {
    AnswerKind kind;
    int index;

    bool operator==(const Prediction&) const = default;
};

// Hard filtering routes by p_time > 0.5; off takes the argmax over the
// concatenation (entities first). Ties break toward the lowest index of the
// active set. ContractError when the active candidate set is empty.
Prediction predict(const CandidateScores& scores, FilterMode mode);

// Ordered candidate pool for time-aware attention: timestamps grounded in the
// question first, then endpoint timestamps of every fact retrieved for the
// grounded entities (span order, file order), deduplicated and capped at
// k_max. Grounded timestamps lead so the cap can never evict them.
std::vector<TimeId> time_attention_pool(const TemporalKG& kg, const QuestionInstance& q,
                                        int k_max);

}  // namespace chronoqa
