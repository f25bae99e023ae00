#include "chronoqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "chronoqa/errors.hpp"

namespace chronoqa {

QaModel build_qa_model(ParamStore& store, const ModelDims& dims, const TokenVocab& vocab,
                       int num_entities, int num_relations, int num_timestamps, uint64_t seed) {
    Rng rng(seed);
    Rng tkge_rng = rng.fork(0x7b9d);
    Rng enc_rng = rng.fork(0x3e11);
    Rng rsn_rng = rng.fork(0x9c25);
    QaModel model;
    model.dims = dims;
    model.tkge =
        TkgeModel::create(store, num_entities, num_relations, num_timestamps, dims.d, tkge_rng);
    model.encoder = EncoderModel::create(store, dims, vocab.size(), enc_rng);
    model.reasoner = ReasonerModel::create(store, dims.d, rsn_rng);
    model.token_vocab = vocab;
    return model;
}

QuestionForward question_forward(Tape& tape, const QaModel& model, const TemporalKG& kg,
                                 const QuestionInstance& q, bool eam_ablation) {
    QuestionForward fwd;
    fwd.q = encode_question(tape, model.encoder, model.tkge, kg, model.token_vocab, q);

    const std::vector<EntityId> grounded = q.grounded_entities();
    if (grounded.empty()) {
        fwd.e_att = tape.transpose(tape.param(*model.reasoner.default_entity));
    } else if (eam_ablation) {
        fwd.e_att =
            tape.transpose(tape.gather_rows(tape.param(*model.tkge.entities), {grounded[0]}));
    } else {
        Var emb = tape.gather_rows(tape.param(*model.tkge.entities), grounded);
        fwd.e_att = attention_pool(tape, fwd.q, emb).pooled;
    }

    const std::vector<TimeId> time_pool = time_attention_pool(kg, q, model.dims.k_max);
    if (time_pool.empty()) {
        fwd.t_att = tape.transpose(tape.param(*model.encoder.unknown_time));
    } else {
        Var emb = tape.gather_rows(tape.param(*model.tkge.times), time_pool);
        fwd.t_att = attention_pool(tape, fwd.q, emb).pooled;
    }

    fwd.entity_scores = score_entities(tape, model.reasoner, fwd.q, fwd.e_att, fwd.t_att,
                                       tape.param(*model.tkge.entities));
    fwd.time_scores =
        score_times(tape, model.reasoner, fwd.q, fwd.e_att, tape.param(*model.tkge.times));
    fwd.p_time = atd(tape, model.reasoner, fwd.q);
    return fwd;
}

Tensor candidate_labels(const QuestionInstance& q, int num_entities, int num_timestamps) {
    Tensor labels(num_entities + num_timestamps, 1);
    for (const Answer& a : q.answers) {
        if (a.kind == AnswerKind::Entity) {
            labels.at(a.id, 0) = 1.0;
        } else {
            labels.at(num_entities + a.id, 0) = 1.0;
        }
    }
    return labels;
}

Var bce_loss(Tape& tape, Var entity_scores, Var time_scores, Tensor labels) {
    Var scores = tape.concat_rows({entity_scores, time_scores});
    return tape.bce_with_logits(scores, std::move(labels));
}

Var atd_loss(Tape& tape, Var p_time, bool answer_is_timestamp) {
    const double z = answer_is_timestamp ? 1.0 : 0.0;
    Var diff = tape.add(p_time, tape.constant(Tensor::scalar(-z)));
    return tape.mul(diff, diff);
}

Var joint_loss(Tape& tape, Var l1, Var l2, double lambda) {
    if (lambda < 0.0) throw ContractError("joint_loss: lambda must be >= 0");
    if (lambda == 0.0) return l1;
    return tape.add(l1, tape.scalar_mul(l2, lambda));
}

namespace {

std::string entity_count_bucket(int n) {
    if (n <= 0) return "0";
    if (n == 1) return "1";
    if (n == 2) return "2";
    return "3+";
}

bool prediction_hits(const Prediction& pred, const QuestionInstance& q) {
    const AnswerKind kind = pred.kind;
    for (const Answer& a : q.answers) {
        if (a.kind == kind && a.id == pred.index) return true;
    }
    return false;
}

}  // namespace

EvalReport evaluate(const QaModel& model, const TemporalKG& kg,
                    const std::vector<QuestionInstance>& questions, FilterMode filter_mode,
                    bool eam_ablation) {
    EvalReport report;
    report.filter_mode = filter_mode;
    for (const QuestionInstance& q : questions) {
        Tape tape;
        QuestionForward fwd = question_forward(tape, model, kg, q, eam_ablation);
        QuestionEval qe;
        qe.id = q.id;
        qe.category = q.category;
        qe.grounded_entity_count = static_cast<int>(q.grounded_entities().size());
        const Tensor& es = tape.value(fwd.entity_scores);
        const Tensor& ts = tape.value(fwd.time_scores);
        qe.scores.entity_scores.assign(es.data(), es.data() + es.size());
        qe.scores.time_scores.assign(ts.data(), ts.data() + ts.size());
        qe.scores.p_time = tape.value(fwd.p_time).item();
        qe.prediction = predict(qe.scores, filter_mode);
        qe.hit = prediction_hits(qe.prediction, q);
        qe.type_correct = (qe.scores.p_time > 0.5) == q.answer_is_timestamp;

        report.total += 1;
        report.hits += qe.hit;
        auto& cat = report.by_category[category_name(q.category)];
        cat.count += 1;
        cat.hits += qe.hit;
        auto& bucket = report.by_entity_count[entity_count_bucket(qe.grounded_entity_count)];
        bucket.count += 1;
        bucket.hits += qe.hit;
        report.type_accuracy += qe.type_correct;
        report.per_question.push_back(std::move(qe));
    }
    if (report.total > 0) {
        report.hits1_overall = static_cast<double>(report.hits) / report.total;
        report.type_accuracy /= report.total;
    }
    return report;
}

TrainResult train(const TemporalKG& kg, const std::vector<QuestionInstance>& train_questions,
                  const std::vector<QuestionInstance>& dev_questions, QaModel& model,
                  ParamStore& store, const TrainConfig& config) {
    if (train_questions.empty()) throw ContractError("train: empty training set");
    if (config.lambda < 0.0) throw ContractError("train: lambda must be >= 0");

    if (config.freeze_tkge) {
        model.tkge.entities->trainable = false;
        model.tkge.relations->trainable = false;
        model.tkge.relations_inv->trainable = false;
        model.tkge.times->trainable = false;
    }
    model.tkge.entities->lr_scale = config.tkge_lr_scale;
    model.tkge.relations->lr_scale = config.tkge_lr_scale;
    model.tkge.relations_inv->lr_scale = config.tkge_lr_scale;
    model.tkge.times->lr_scale = config.tkge_lr_scale;

    const int num_entities = kg.entities().size();
    const int num_timestamps = kg.num_timestamps();
    std::vector<Tensor> labels;
    labels.reserve(train_questions.size());
    for (const auto& q : train_questions) {
        labels.push_back(candidate_labels(q, num_entities, num_timestamps));
    }

    AdamOptimizer optimizer(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
    Rng order_rng = Rng(config.seed).fork(0x0d0e);
    std::vector<size_t> order(train_questions.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    std::vector<Tensor> best_values;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double sum_total = 0.0, sum_bce = 0.0, sum_atd = 0.0;
        size_t cursor = 0;
        while (cursor < order.size()) {
            const size_t batch_end =
                std::min(cursor + static_cast<size_t>(config.batch_size), order.size());
            store.zero_grads();
            for (size_t bi = cursor; bi < batch_end; ++bi) {
                const QuestionInstance& q = train_questions[order[bi]];
                Tape tape;
                QuestionForward fwd = question_forward(tape, model, kg, q, config.eam_ablation);
                Var l1 = bce_loss(tape, fwd.entity_scores, fwd.time_scores, labels[order[bi]]);
                Var l2 = atd_loss(tape, fwd.p_time, q.answer_is_timestamp);
                Var loss = joint_loss(tape, l1, l2, config.lambda);
                const double total = tape.value(loss).item();
                if (!std::isfinite(total)) {
                    throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                        " question " + q.id);
                }
                sum_total += total;
                sum_bce += tape.value(l1).item();
                sum_atd += tape.value(l2).item();
                tape.backward(loss);
            }
            optimizer.step(store);
            cursor = batch_end;
        }
        const double n = static_cast<double>(train_questions.size());
        result.curve.push_back({sum_total / n, sum_bce / n, sum_atd / n});

        if (!dev_questions.empty()) {
            EvalReport dev =
                evaluate(model, kg, dev_questions, config.filter_mode, config.eam_ablation);
            if (result.best_epoch < 0 || dev.hits1_overall > result.best_dev_hits1) {
                result.best_epoch = epoch;
                result.best_dev_hits1 = dev.hits1_overall;
                best_values.clear();
                for (size_t i = 0; i < store.size(); ++i) best_values.push_back(store[i].value);
            }
        }
    }

    if (!best_values.empty()) {
        for (size_t i = 0; i < store.size(); ++i) store[i].value = best_values[i];
    }
    if (!dev_questions.empty()) {
        result.final_dev_report =
            evaluate(model, kg, dev_questions, config.filter_mode, config.eam_ablation);
    }
    result.final_dev_report.loss_curve = result.curve;
    return result;
}

void emit_report(const EvalReport& report, const std::string& prefix) {
    {
        std::ofstream out(prefix + "hits_by_category.csv");
        if (!out) throw IoError("report: cannot write " + prefix + "hits_by_category.csv");
        out << std::setprecision(17);
        out << "category,count,hits1\n";
        for (const auto& [name, cell] : report.by_category) {
            out << name << ',' << cell.count << ',' << cell.rate() << '\n';
        }
    }
    {
        std::ofstream out(prefix + "hits_by_entity_count.csv");
        if (!out) throw IoError("report: cannot write " + prefix + "hits_by_entity_count.csv");
        out << std::setprecision(17);
        out << "entities,count,hits1\n";
        for (const auto& [name, cell] : report.by_entity_count) {
            out << name << ',' << cell.count << ',' << cell.rate() << '\n';
        }
    }
    {
        std::ofstream out(prefix + "loss_curve.csv");
        if (!out) throw IoError("report: cannot write " + prefix + "loss_curve.csv");
        out << std::setprecision(17);
        out << "epoch,L,L1,L2\n";
        for (size_t e = 0; e < report.loss_curve.size(); ++e) {
            const auto& p = report.loss_curve[e];
            out << e << ',' << p.total << ',' << p.bce << ',' << p.atd << '\n';
        }
    }
}

}  // namespace chronoqa
