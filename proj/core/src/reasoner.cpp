#include "chronoqa/reasoner.hpp"

#include <algorithm>
#include <string>

#include "chronoqa/errors.hpp"

namespace chronoqa {

ReasonerModel ReasonerModel::create(ParamStore& store, int d, Rng& rng, double init_stddev) {
    ReasonerModel rsn;
    rsn.p_e = &store.create("reasoner.p_e", Tensor::randn(d, d, rng, 0.0, init_stddev));
    rsn.p_t = &store.create("reasoner.p_t", Tensor::randn(d, d, rng, 0.0, init_stddev));
    rsn.w_type = &store.create("reasoner.w_type", Tensor::randn(1, d, rng, 0.0, init_stddev));
    rsn.default_entity =
        &store.create("reasoner.default_entity", Tensor::randn(1, d, rng, 0.0, init_stddev));
    return rsn;
}

AttentionResult attention_pool(Tape& tape, Var query_col, Var embeddings) {
    const Tensor& emb = tape.value(embeddings);
    if (emb.rows() < 1) throw ContractError("attention_pool: empty embedding set");
    const Tensor& q = tape.value(query_col);
    if (q.cols() != 1 || q.rows() != emb.cols()) {
        throw DimensionError("attention_pool: query " + q.shape_str() + " vs embeddings " +
                             emb.shape_str());
    }
    Var logits = tape.transpose(tape.matmul(embeddings, query_col));  // 1 x k
    Var weights = tape.softmax_rows(logits);
    Var pooled = tape.matmul(tape.transpose(embeddings), tape.transpose(weights));  // D x 1
    return {pooled, weights};
}

Var score_entities(Tape& tape, const ReasonerModel& rsn, Var q, Var e_att, Var t_att,
                   Var candidate_table) {
    Var pq = tape.matmul(tape.param(*rsn.p_e), q);
    Var u = tape.complex_mul(e_att, tape.complex_mul(pq, t_att));
    return tape.matmul(candidate_table, u);
}

Var score_times(Tape& tape, const ReasonerModel& rsn, Var q, Var e_att, Var candidate_table) {
    Var pq = tape.matmul(tape.param(*rsn.p_t), q);
    Var magnitude = tape.complex_mul(e_att, tape.complex_conj(e_att));
    Var g = tape.complex_mul(magnitude, pq);
    return tape.matmul(candidate_table, tape.complex_conj(g));
}

Var atd(Tape& tape, const ReasonerModel& rsn, Var q) {
    return tape.sigmoid(tape.matmul(tape.param(*rsn.w_type), q));
}

FilterMode filter_mode_from_name(const std::string& name) {
    if (name == "off") return FilterMode::Off;
    if (name == "hard") return FilterMode::Hard;
    throw ContractError("filter mode: expected 'off' or 'hard', got '" + name + "'");
}

const char* filter_mode_name(FilterMode mode) {
    return mode == FilterMode::Hard ? "hard" : "off";
}

namespace {

int argmax(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

}  // namespace

Prediction predict(const CandidateScores& scores, FilterMode mode) {
    if (scores.entity_scores.empty() && scores.time_scores.empty()) {
        throw ContractError("predict: no candidates");
    }
    if (mode == FilterMode::Hard) {
        if (scores.p_time > 0.5) {
            if (scores.time_scores.empty()) throw ContractError("predict: no time candidates");
            return {AnswerKind::Timestamp, argmax(scores.time_scores)};
        }
        if (scores.entity_scores.empty()) throw ContractError("predict: no entity candidates");
        return {AnswerKind::Entity, argmax(scores.entity_scores)};
    }
    // filter off: argmax over the concatenation, entities first
    Prediction best{AnswerKind::Entity, 0};
    double best_score = 0.0;
    bool first = true;
    for (int i = 0; i < static_cast<int>(scores.entity_scores.size()); ++i) {
        const double s = scores.entity_scores[static_cast<size_t>(i)];
        if (first || s > best_score) {
            best = {AnswerKind::Entity, i};
            best_score = s;
            first = false;
        }
    }
    for (int i = 0; i < static_cast<int>(scores.time_scores.size()); ++i) {
        const double s = scores.time_scores[static_cast<size_t>(i)];
        if (first || s > best_score) {
            best = {AnswerKind::Timestamp, i};
            best_score = s;
            first = false;
        }
    }
    return best;
}

std::vector<TimeId> time_attention_pool(const TemporalKG& kg, const QuestionInstance& q,
                                        int k_max) {
    std::vector<TimeId> pool;
    auto push = [&pool, k_max](TimeId t) {
        if (static_cast<int>(pool.size()) >= k_max) return;
        if (std::find(pool.begin(), pool.end(), t) == pool.end()) pool.push_back(t);
    };
    for (TimeId t : q.grounded_times()) push(t);
    for (EntityId e : q.grounded_entities()) {
        for (const Fact& f : kg.retrieve_facts(e)) {
            push(kg.time_id(f.t_start));
            push(kg.time_id(f.t_end));
        }
    }
    return pool;
}

}  // namespace chronoqa
