#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "chronoqa/encoder.hpp"
#include "chronoqa/optimizer.hpp"
#include "chronoqa/question.hpp"
#include "chronoqa/reasoner.hpp"
#include "chronoqa/tkge.hpp"

namespace chronoqa {

struct TrainConfig {
    double lambda = 1.0;  // weight of the answer-type discrimination loss
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    uint64_t seed = 1;
    FilterMode filter_mode = FilterMode::Hard;
    bool freeze_tkge = false;
    // Step multiplier for the pretrained embedding tables during joint
    // training; 1.0 trains them at the head's rate.
    double tkge_lr_scale = 1.0;
    // Replaces entity-aware attention with first-grounded-entity selection
    // (ablation switch used by the evaluation harness).
    bool eam_ablation = false;
    ModelDims dims;
};

// The full QA model: embedding tables, question encoder, reasoner head, and
// the token vocabulary they were trained with.
struct QaModel {
    ModelDims dims;
    TkgeModel tkge;
    EncoderModel encoder;
    ReasonerModel reasoner;
    TokenVocab token_vocab;
};

// Creates all parameters in `store`. The TKGE tables can be overwritten from
// a pretraining checkpoint afterwards.
QaModel build_qa_model(ParamStore& store, const ModelDims& dims, const TokenVocab& vocab,
                       int num_entities, int num_relations, int num_timestamps, uint64_t seed);

struct QuestionForward {
    Var q;              // D x 1 question representation
    Var e_att;          // D x 1 aggregated entity
    Var t_att;          // D x 1 aggregated timestamp
    Var entity_scores;  // |E| x 1
    Var time_scores;    // |T| x 1
    Var p_time;         // 1 x 1
};

QuestionForward question_forward(Tape& tape, const QaModel& model, const TemporalKG& kg,
                                 const QuestionInstance& q, bool eam_ablation = false);

// Multi-hot gold labels over the concatenated candidate list (entities then
// timestamps), shape (|E| + |T|) x 1.
Tensor candidate_labels(const QuestionInstance& q, int num_entities, int num_timestamps);

// Summed binary cross entropy of the concatenated candidate scores against
// multi-hot labels. DataError when no label is positive.
Var bce_loss(Tape& tape, Var entity_scores, Var time_scores, Tensor labels);

// (z_q - p_time)^2 for one question.
Var atd_loss(Tape& tape, Var p_time, bool answer_is_timestamp);

// L = L1 + lambda * L2 (lambda >= 0).
Var joint_loss(Tape& tape, Var l1, Var l2, double lambda);

struct LossCurvePoint {
    double total = 0.0;  // mean joint loss per question
    double bce = 0.0;    // mean L1 per question
    double atd = 0.0;    // mean L2 per question
};

struct BreakdownCell {
    int count = 0;
    int hits = 0;

    double rate() const { return count == 0 ? 0.0 : static_cast<double>(hits) / count; }
};

struct QuestionEval {
    std::string id;
    Category category = Category::Explicit;
    int grounded_entity_count = 0;
    CandidateScores scores;
    Prediction prediction{AnswerKind::Entity, 0};
    bool hit = false;
    bool type_correct = false;
};

struct EvalReport {
    FilterMode filter_mode = FilterMode::Hard;
    int total = 0;
    int hits = 0;
    double hits1_overall = 0.0;
    double type_accuracy = 0.0;
    std::map<std::string, BreakdownCell> by_category;
    std::map<std::string, BreakdownCell> by_entity_count;  // keys "0","1","2","3+"
    std::vector<LossCurvePoint> loss_curve;                // filled by train()
    std::vector<QuestionEval> per_question;
};

EvalReport evaluate(const QaModel& model, const TemporalKG& kg,
                    const std::vector<QuestionInstance>& questions, FilterMode filter_mode,
                    bool eam_ablation = false);

struct TrainResult {
    std::vector<LossCurvePoint> curve;
    int best_epoch = -1;
    double best_dev_hits1 = 0.0;
    EvalReport final_dev_report;
};

// Mini-batch joint training with per-question gradient accumulation.
// Evaluates the dev split each epoch, restores the best checkpoint at the
// end, and is deterministic per seed. Throws TrainingError on non-finite
// loss or gradients.
TrainResult train(const TemporalKG& kg, const std::vector<QuestionInstance>& train_questions,
                  const std::vector<QuestionInstance>& dev_questions, QaModel& model,
                  ParamStore& store, const TrainConfig& config);

// Writes hits_by_category.csv, hits_by_entity_count.csv and loss_curve.csv
// under `prefix` (a directory path with trailing separator or a file stem).
void emit_report(const EvalReport& report, const std::string& prefix);

}  // namespace chronoqa
