#pragma once

#include <vector>

#include "chronoqa/params.hpp"
#include "chronoqa/question.hpp"
#include "chronoqa/rng.hpp"
#include "chronoqa/tape.hpp"
#include "chronoqa/tkge.hpp"

namespace chronoqa {

struct ModelDims {
    int d = 64;       // shared embedding dimension D (even)
    int d_b = 64;     // token embedding width
    int layers = 2;   // transformer encoder layers
    int heads = 4;    // attention heads per layer
    int ff_mult = 4;  // feed-forward width = ff_mult * D
    int k_max = 32;   // cap on the time-attention candidate pool
};

struct EncoderLayerParams {
    Param* wq;
    Param* wk;
    Param* wv;
    Param* wo;
    Param* ln1_gain;
    Param* ln1_bias;
    Param* ff_w1;
    Param* ff_b1;
    Param* ff_w2;
    Param* ff_b2;
    Param* ln2_gain;
    Param* ln2_bias;
};

// Question encoder: token embedding + projection, entity/timestamp span
// substitution, additive start/end time fusion, l transformer layers, and
// [CLS] extraction. No positional encoding; the substituted embeddings and
// the [CLS] aggregation carry the signal.
struct EncoderModel {
    ModelDims dims;
    Param* token_table;   // vocab x D_B
    Param* w_b;           // D x D_B token projection
    Param* w_e;           // D x D entity projection
    Param* w_t;           // D x D timestamp projection
    Param* w_st;          // D x D start-time fusion
    Param* w_et;          // D x D end-time fusion
    Param* unknown_time;  // 1 x D stand-in for an absent scope component
    std::vector<EncoderLayerParams> layers;

    static EncoderModel create(ParamStore& store, const ModelDims& dims, int vocab_size,
                               Rng& rng, double init_stddev = 0.05);
};

// Token columns: column i is W_B * token_table[token_ids[i]]; token_ids must
// start with the [CLS] id. Returns a D x N matrix.
Var embed_tokens(Tape& tape, const EncoderModel& enc, const std::vector<int>& token_ids);

// Replaces annotated span columns with projected entity / timestamp
// embeddings; other columns pass through untouched. Span indices exclude the
// [CLS] column and are shifted internally.
Var substitute(Tape& tape, const EncoderModel& enc, const TkgeModel& tkge, Var q_b,
               const std::vector<EntitySpan>& entity_spans,
               const std::vector<TimeSpan>& time_spans);

// Adds W_st * t_start + W_et * t_end to every entity-span column; absent
// scope components use the learned unknown-time row. `scopes` runs parallel
// to `entity_spans`.
Var fuse_time(Tape& tape, const EncoderModel& enc, const TkgeModel& tkge, Var q_e,
              const std::vector<EntitySpan>& entity_spans,
              const std::vector<TimeScope>& scopes);

// l transformer layers then the [CLS] column; returns a D x 1 vector.
Var encode(Tape& tape, const EncoderModel& enc, Var q_t);

// Full pipeline for one question: tokenize ids, embed, substitute, fuse the
// per-entity scopes retrieved from the KG, encode.
Var encode_question(Tape& tape, const EncoderModel& enc, const TkgeModel& tkge,
                    const TemporalKG& kg, const TokenVocab& vocab, const QuestionInstance& q);

}  // namespace chronoqa
