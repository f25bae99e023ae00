#include "chronoqa/tkge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chronoqa/errors.hpp"
#include "chronoqa/optimizer.hpp"

namespace chronoqa {

std::vector<std::complex<double>> complex_view(std::span<const double> row) {
    if (row.size() % 2 != 0) {
        throw ContractError("complex_view: dimension must be even, got " +
                            std::to_string(row.size()));
    }
    const size_t h = row.size() / 2;
    std::vector<std::complex<double>> out(h);
    for (size_t j = 0; j < h; ++j) out[j] = {row[j], row[j + h]};
    return out;
}

std::vector<double> real_layout(const std::vector<std::complex<double>>& v) {
    std::vector<double> out(v.size() * 2);
    for (size_t j = 0; j < v.size(); ++j) {
        out[j] = v[j].real();
        out[j + v.size()] = v[j].imag();
    }
    return out;
}

double tcomplex_score(std::span<const double> e_s, std::span<const double> v_r,
                      std::span<const double> e_o, std::span<const double> t) {
    const size_t d = e_s.size();
    if (v_r.size() != d || e_o.size() != d || t.size() != d) {
        throw ContractError("tcomplex_score: dimension mismatch");
    }
    if (d % 2 != 0) {
        throw ContractError("tcomplex_score: dimension must be even, got " + std::to_string(d));
    }
    const size_t h = d / 2;
    double score = 0.0;
    for (size_t j = 0; j < h; ++j) {
        // w = v_r[j] * t[j]; u = e_s[j] * w; score += Re(u * conj(e_o[j]))
        const double wr = v_r[j] * t[j] - v_r[j + h] * t[j + h];
        const double wi = v_r[j] * t[j + h] + v_r[j + h] * t[j];
        const double ur = e_s[j] * wr - e_s[j + h] * wi;
        const double ui = e_s[j] * wi + e_s[j + h] * wr;
        score += ur * e_o[j] + ui * e_o[j + h];
    }
    return score;
}

TkgeModel TkgeModel::create(ParamStore& store, int num_entities, int num_relations,
                            int num_timestamps, int dim, Rng& rng, double init_stddev) {
    if (dim % 2 != 0) {
        throw ContractError("tkge: dimension must be even, got " + std::to_string(dim));
    }
    TkgeModel model;
    model.dim = dim;
    model.entities =
        &store.create("tkge.entities", Tensor::randn(num_entities, dim, rng, 0.0, init_stddev));
    model.relations =
        &store.create("tkge.relations", Tensor::randn(num_relations, dim, rng, 0.0, init_stddev));
    model.relations_inv = &store.create("tkge.relations_inv",
                                        Tensor::randn(num_relations, dim, rng, 0.0, init_stddev));
    model.times =
        &store.create("tkge.times", Tensor::randn(num_timestamps, dim, rng, 0.0, init_stddev));
    return model;
}

std::span<const double> TkgeModel::entity_row(EntityId e) const {
    const Tensor& t = entities->value;
    if (e < 0 || e >= t.rows()) {
        throw LookupError("tkge: entity id " + std::to_string(e) + " out of range");
    }
    return {t.data() + static_cast<size_t>(e) * dim, static_cast<size_t>(dim)};
}

std::span<const double> TkgeModel::relation_row(RelationId r) const {
    const Tensor& t = relations->value;
    if (r < 0 || r >= t.rows()) {
        throw LookupError("tkge: relation id " + std::to_string(r) + " out of range");
    }
    return {t.data() + static_cast<size_t>(r) * dim, static_cast<size_t>(dim)};
}

std::span<const double> TkgeModel::relation_inv_row(RelationId r) const {
    const Tensor& t = relations_inv->value;
    if (r < 0 || r >= t.rows()) {
        throw LookupError("tkge: relation id " + std::to_string(r) + " out of range");
    }
    return {t.data() + static_cast<size_t>(r) * dim, static_cast<size_t>(dim)};
}

std::span<const double> TkgeModel::time_row(TimeId t) const {
    const Tensor& tt = times->value;
    if (t < 0 || t >= tt.rows()) {
        throw LookupError("tkge: timestamp id " + std::to_string(t) + " out of range");
    }
    return {tt.data() + static_cast<size_t>(t) * dim, static_cast<size_t>(dim)};
}

namespace {

// Real layout of the complex elementwise product a * b.
std::vector<double> layout_cmul(std::span<const double> a, std::span<const double> b) {
    const size_t h = a.size() / 2;
    std::vector<double> out(a.size());
    for (size_t j = 0; j < h; ++j) {
        out[j] = a[j] * b[j] - a[j + h] * b[j + h];
        out[j + h] = a[j] * b[j + h] + a[j + h] * b[j];
    }
    return out;
}

std::vector<double> layout_conj(std::span<const double> a) {
    const size_t h = a.size() / 2;
    std::vector<double> out(a.size());
    for (size_t j = 0; j < h; ++j) {
        out[j] = a[j];
        out[j + h] = -a[j + h];
    }
    return out;
}

std::vector<double> table_times_vector(const Tensor& table, const std::vector<double>& v) {
    std::vector<double> scores(static_cast<size_t>(table.rows()));
    for (int i = 0; i < table.rows(); ++i) {
        const double* row = table.data() + static_cast<size_t>(i) * table.cols();
        double s = 0.0;
        for (int c = 0; c < table.cols(); ++c) s += row[c] * v[static_cast<size_t>(c)];
        scores[static_cast<size_t>(i)] = s;
    }
    return scores;
}

}  // namespace

std::vector<double> score_all_objects(const TkgeModel& model, EntityId s, RelationId r, TimeId t) {
    // Re(<e_s, v_r . t, conj(e_o)>) = dot(layout(e_o), layout(e_s . v_r . t))
    const auto u = layout_cmul(model.entity_row(s), layout_cmul(model.relation_row(r), model.time_row(t)));
    return table_times_vector(model.entities->value, u);
}

std::vector<double> score_all_subjects(const TkgeModel& model, RelationId r, EntityId o, TimeId t) {
    // Re(<e_s', v_r . t, conj(e_o)>) = dot(layout(e_s'), layout(conj((v_r . t) . conj(e_o))))
    const auto m = layout_cmul(layout_cmul(model.relation_row(r), model.time_row(t)),
                               layout_conj(model.entity_row(o)));
    return table_times_vector(model.entities->value, layout_conj(m));
}

Var tape_score_all_objects(Tape& tape, const TkgeModel& model, Var subject_col, Var relation_col,
                           Var time_col) {
    Var u = tape.complex_mul(subject_col, tape.complex_mul(relation_col, time_col));
    return tape.matmul(tape.param(*model.entities), u);
}

Var tape_score_all_subjects(Tape& tape, const TkgeModel& model, Var relation_col, Var object_col,
                            Var time_col) {
    Var m = tape.complex_mul(tape.complex_mul(relation_col, time_col),
                             tape.complex_conj(object_col));
    return tape.matmul(tape.param(*model.entities), tape.complex_conj(m));
}

namespace {

// Rank of `target` in `scores` by strictly-greater count (1 = best).
int rank_of(const std::vector<double>& scores, int target) {
    const double ref = scores[static_cast<size_t>(target)];
    int rank = 1;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > ref) ++rank;
    }
    return rank;
}

}  // namespace

TkgeModel pretrain(const TemporalKG& kg, const PretrainConfig& config, ParamStore& store,
                   PretrainReport* report) {
    if (kg.facts().empty()) throw ContractError("pretrain: empty knowledge graph");

    Rng rng(config.seed);
    Rng init_rng = rng.fork(0x7b9d);
    TkgeModel model = TkgeModel::create(store, kg.entities().size(), kg.relations().size(),
                                        kg.num_timestamps(), config.dim, init_rng);

    std::vector<Quadruple> quads = kg.training_quadruples();
    Rng split_rng = rng.fork(0x51a7);
    split_rng.shuffle(quads);
    const size_t n_eval =
        static_cast<size_t>(std::llround(config.holdout_fraction * static_cast<double>(quads.size())));
    std::vector<Quadruple> eval_set(quads.begin(), quads.begin() + static_cast<long>(n_eval));
    std::vector<Quadruple> train_set(quads.begin() + static_cast<long>(n_eval), quads.end());
    if (train_set.empty()) throw ContractError("pretrain: no training quadruples after holdout");

    AdamOptimizer optimizer(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
    Rng order_rng = rng.fork(0xe901);

    std::vector<double> epoch_losses;
    epoch_losses.reserve(static_cast<size_t>(config.epochs));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.epochs > 1 && config.final_learning_rate > 0.0 &&
            config.final_learning_rate != config.learning_rate) {
            const double t = static_cast<double>(epoch) / (config.epochs - 1);
            optimizer.set_learning_rate(config.learning_rate *
                                        std::pow(config.final_learning_rate / config.learning_rate, t));
        }
        order_rng.shuffle(train_set);
        double epoch_loss = 0.0;
        size_t cursor = 0;
        while (cursor < train_set.size()) {
            const size_t batch_end =
                std::min(cursor + static_cast<size_t>(config.batch_size), train_set.size());
            store.zero_grads();
            for (size_t qi = cursor; qi < batch_end; ++qi) {
                const Quadruple& quad = train_set[qi];
                Tape tape;
                Var ents = tape.param(*model.entities);
                Var rels = tape.param(*model.relations);
                Var rels_inv = tape.param(*model.relations_inv);
                Var times = tape.param(*model.times);
                Var s_col = tape.transpose(tape.gather_rows(ents, {quad.subject}));
                Var r_col = tape.transpose(tape.gather_rows(rels, {quad.relation}));
                Var ri_col = tape.transpose(tape.gather_rows(rels_inv, {quad.relation}));
                Var o_col = tape.transpose(tape.gather_rows(ents, {quad.object}));
                Var t_col = tape.transpose(tape.gather_rows(times, {quad.time}));

                // Both directions keep the candidate set in the conjugated
                // object slot; the subject direction goes through the
                // reciprocal relation embedding.
                Var obj_scores = tape.matmul(ents, tape.complex_mul(s_col, tape.complex_mul(r_col, t_col)));
                Var subj_scores =
                    tape.matmul(ents, tape.complex_mul(o_col, tape.complex_mul(ri_col, t_col)));
                Var loss = tape.add(tape.ce_with_logits(obj_scores, quad.object),
                                    tape.ce_with_logits(subj_scores, quad.subject));
                if (config.nuclear_norm_weight > 0.0) {
                    Var reg = tape.add(
                        tape.add(tape.complex_abs3_sum(s_col),
                                 tape.add(tape.complex_abs3_sum(r_col),
                                          tape.complex_abs3_sum(ri_col))),
                        tape.add(tape.complex_abs3_sum(o_col), tape.complex_abs3_sum(t_col)));
                    loss = tape.add(loss, tape.scalar_mul(reg, config.nuclear_norm_weight));
                }
                const double loss_value = tape.value(loss).item();
                if (!std::isfinite(loss_value)) {
                    throw TrainingError("pretrain: non-finite loss at epoch " +
                                        std::to_string(epoch));
                }
                epoch_loss += loss_value;
                tape.backward(loss);
            }
            optimizer.step(store);
            cursor = batch_end;
        }
        epoch_losses.push_back(epoch_loss / static_cast<double>(train_set.size()));
    }

    if (config.rescale_tables) {
        auto rescale = [&config](Tensor& table) {
            double total = 0.0;
            for (int r = 0; r < table.rows(); ++r) {
                double norm = 0.0;
                for (int c = 0; c < table.cols(); ++c) {
                    norm += table.at(r, c) * table.at(r, c);
                }
                total += std::sqrt(norm);
            }
            const double mean = total / table.rows();
            if (mean > 0.0) {
                const double factor = config.rescale_norm / mean;
                for (size_t i = 0; i < table.size(); ++i) table[i] *= factor;
            }
        };
        rescale(model.entities->value);
        rescale(model.relations->value);
        rescale(model.relations_inv->value);
        rescale(model.times->value);
    }

    if (report) {
        report->epoch_losses = std::move(epoch_losses);
        const std::vector<Quadruple>& eval_quads = eval_set.empty() ? train_set : eval_set;
        report->eval_count = static_cast<int>(eval_quads.size());
        int h1o = 0, h10o = 0, h1s = 0, h10s = 0;
        for (const Quadruple& quad : eval_quads) {
            const int obj_rank =
                rank_of(score_all_objects(model, quad.subject, quad.relation, quad.time), quad.object);
            // Subject ranking through the reciprocal relation, the direction
            // the model was trained in.
            const auto u = layout_cmul(
                model.entity_row(quad.object),
                layout_cmul(model.relation_inv_row(quad.relation), model.time_row(quad.time)));
            const int subj_rank = rank_of(table_times_vector(model.entities->value, u), quad.subject);
            h1o += obj_rank <= 1;
            h10o += obj_rank <= 10;
            h1s += subj_rank <= 1;
            h10s += subj_rank <= 10;
        }
        const double n = static_cast<double>(eval_quads.size());
        report->hits1_object = h1o / n;
        report->hits10_object = h10o / n;
        report->hits1_subject = h1s / n;
        report->hits10_subject = h10s / n;
    }
    return model;
}

}  // namespace chronoqa
