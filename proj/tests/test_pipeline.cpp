#include <cmath>
#include <numeric>

#include "doctest.h"

#include "chronoqa/checkpoint.hpp"
#include "chronoqa/pipeline.hpp"
#include "chronoqa/synth.hpp"
#include "testutil.hpp"

using namespace chronoqa;

namespace {

// Small but complete world for pipeline plumbing tests.
struct PipelineFixture {
    WorldConfig world;
    TemporalKG kg;
    SynthDataset data;
    ModelDims dims;

    PipelineFixture() {
        world.seed = 13;
        world.n_people = 6;
        world.n_positions = 2;
        world.year_min = 1900;
        world.year_max = 1930;
        world.mean_tenure = 5.0;
        world.questions_per_template = 20;
        kg = generate_world(world);
        data = split_dataset(generate_questions(kg, world));
        dims.d = 16;
        dims.d_b = 16;
        dims.layers = 1;
        dims.heads = 2;
        dims.ff_mult = 2;
        dims.k_max = 16;
    }

    QaModel make_model(ParamStore& store, uint64_t seed = 3) const {
        TokenVocab vocab = TokenVocab::build(data.train);
        return build_qa_model(store, dims, vocab, kg.entities().size(), kg.relations().size(),
                              kg.num_timestamps(), seed);
    }
};

double loop_bce(const std::vector<double>& scores, const std::vector<double>& labels) {
    double total = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-scores[i]));
        total += -labels[i] * std::log(p) - (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return total;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("bce of a single positive candidate at zero score is ln 2") {
    Tape tape;
    Var ent = tape.constant(Tensor::scalar(0.0));
    Var tim = tape.constant(Tensor::scalar(-30.0));
    Tensor labels(2, 1);
    labels.at(0, 0) = 1.0;
    const double loss = tape.value(bce_loss(tape, ent, tim, labels)).item();
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("perfectly separated scores drive the loss below 1e-8") {
    Tape tape;
    Var ent = tape.constant(Tensor::column({20.0}));
    Var tim = tape.constant(Tensor::column({-20.0}));
    Tensor labels(2, 1);
    labels.at(0, 0) = 1.0;
    CHECK(tape.value(bce_loss(tape, ent, tim, labels)).item() < 1e-8);
}

TEST_CASE("bce matches a per-candidate loop oracle") {
    Rng rng(10);
    for (int it = 0; it < 100; ++it) {
        const int ne = 1 + static_cast<int>(rng.uniform_int(6));
        const int nt = 1 + static_cast<int>(rng.uniform_int(6));
        Tensor ent = Tensor::randn(ne, 1, rng, 0.0, 3.0);
        Tensor tim = Tensor::randn(nt, 1, rng, 0.0, 3.0);
        Tensor labels(ne + nt, 1);
        labels.at(static_cast<int>(rng.uniform_int(static_cast<uint64_t>(ne + nt))), 0) = 1.0;
        Tape tape;
        const double fused =
            tape.value(bce_loss(tape, tape.constant(ent), tape.constant(tim), labels)).item();
        std::vector<double> scores(ent.data(), ent.data() + ent.size());
        scores.insert(scores.end(), tim.data(), tim.data() + tim.size());
        std::vector<double> label_v(labels.data(), labels.data() + labels.size());
        CHECK(std::abs(fused - loop_bce(scores, label_v)) <= 1e-12 * std::max(1.0, fused));
    }
}

TEST_CASE("bce rejects label vectors without positives") {
    Tape tape;
    Var ent = tape.constant(Tensor::scalar(0.0));
    Var tim = tape.constant(Tensor::scalar(0.0));
    CHECK_THROWS_AS(bce_loss(tape, ent, tim, Tensor(2, 1)), DataError);
}

TEST_CASE("atd loss squared-error cases") {
    auto value = [](double p, bool z) {
        Tape tape;
        Var pv = tape.constant(Tensor::scalar(p));
        return tape.value(atd_loss(tape, pv, z)).item();
    };
    CHECK(value(1.0, true) == 0.0);
    CHECK(value(0.0, false) == 0.0);
    CHECK(value(0.5, true) == doctest::Approx(0.25));
    // Batch of two: 0.25 + 0.04.
    CHECK(value(0.5, true) + value(0.2, false) == doctest::Approx(0.29));
}

TEST_CASE("joint loss is the exact weighted sum") {
    Tape tape;
    Var l1 = tape.constant(Tensor::scalar(0.5));
    Var l2 = tape.constant(Tensor::scalar(0.1));
    CHECK(tape.value(joint_loss(tape, l1, l2, 1.0)).item() == doctest::Approx(0.6));
    CHECK(tape.value(joint_loss(tape, l1, l2, 0.0)).item() == 0.5);
    CHECK_THROWS_AS(joint_loss(tape, l1, l2, -1.0), ContractError);
}

TEST_CASE("joint gradient is the sum of the per-term gradients") {
    PipelineFixture fx;
    const double lambda = 0.7;
    REQUIRE(!fx.data.train.empty());
    const QuestionInstance& q = fx.data.train.front();
    const Tensor labels = candidate_labels(q, fx.kg.entities().size(), fx.kg.num_timestamps());

    auto grads_for = [&](int term) {  // 0: L1 only, 1: L2 only, 2: joint
        ParamStore store;
        QaModel model = fx.make_model(store, 21);
        Tape tape;
        QuestionForward fwd = question_forward(tape, model, fx.kg, q);
        Var l1 = bce_loss(tape, fwd.entity_scores, fwd.time_scores, labels);
        Var l2 = atd_loss(tape, fwd.p_time, q.answer_is_timestamp);
        Var loss = term == 0 ? l1 : (term == 1 ? l2 : joint_loss(tape, l1, l2, lambda));
        tape.backward(loss);
        std::vector<double> grads;
        for (size_t p = 0; p < store.size(); ++p) {
            for (size_t i = 0; i < store[p].grad.size(); ++i) grads.push_back(store[p].grad[i]);
        }
        return grads;
    };
    const auto g1 = grads_for(0);
    const auto g2 = grads_for(1);
    const auto gj = grads_for(2);
    for (size_t i = 0; i < gj.size(); ++i) {
        CHECK(std::abs(gj[i] - (g1[i] + lambda * g2[i])) <=
              1e-9 * std::max(1.0, std::abs(gj[i])));
    }
}

TEST_CASE("candidate labels place answers in the concatenated layout") {
    QuestionInstance q;
    q.answers = {{AnswerKind::Entity, 2}, {AnswerKind::Timestamp, 1}};
    const Tensor labels = candidate_labels(q, 4, 3);
    CHECK(labels.at(2, 0) == 1.0);
    CHECK(labels.at(4 + 1, 0) == 1.0);
    double total = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) total += labels[i];
    CHECK(total == 2.0);
}

TEST_CASE("evaluate aggregates hits consistently with its raw scores") {
    PipelineFixture fx;
    ParamStore store;
    QaModel model = fx.make_model(store);
    const auto subset = std::vector<QuestionInstance>(fx.data.dev.begin(),
                                                      fx.data.dev.begin() +
                                                          std::min<size_t>(fx.data.dev.size(), 30));
    EvalReport report = evaluate(model, fx.kg, subset, FilterMode::Hard);
    CHECK(report.total == static_cast<int>(subset.size()));

    // Brute-force recomputation from the recorded raw scores.
    int hits = 0;
    for (size_t i = 0; i < report.per_question.size(); ++i) {
        const Prediction p = predict(report.per_question[i].scores, FilterMode::Hard);
        bool hit = false;
        for (const Answer& a : subset[i].answers) {
            if (a.kind == p.kind && a.id == p.index) hit = true;
        }
        CHECK(hit == report.per_question[i].hit);
        hits += hit;
    }
    CHECK(report.hits == hits);
    CHECK(report.hits1_overall == doctest::Approx(static_cast<double>(hits) / report.total));

    // Category and entity-count cells sum to the total.
    int by_cat = 0, by_cnt = 0;
    for (const auto& [k, cell] : report.by_category) by_cat += cell.count;
    for (const auto& [k, cell] : report.by_entity_count) by_cnt += cell.count;
    CHECK(by_cat == report.total);
    CHECK(by_cnt == report.total);
}

TEST_CASE("an untrained model scores near chance") {
    PipelineFixture fx;
    ParamStore store;
    QaModel model = fx.make_model(store, 99);
    EvalReport report = evaluate(model, fx.kg, fx.data.test, FilterMode::Off);
    // Candidate set is |E| + |T| >> 1; random inits land far below 0.3.
    CHECK(report.hits1_overall <= 0.3);
}

TEST_CASE("prediction at uniform random scores hits at roughly one over C") {
    Rng rng(3);
    const int c_ent = 10, c_time = 10;
    const int trials = 20000;
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        CandidateScores s;
        for (int i = 0; i < c_ent; ++i) s.entity_scores.push_back(rng.uniform());
        for (int i = 0; i < c_time; ++i) s.time_scores.push_back(rng.uniform());
        s.p_time = 0.0;
        const int gold_entity = static_cast<int>(rng.uniform_int(c_ent + c_time));
        const Prediction p = predict(s, FilterMode::Off);
        const bool gold_is_entity = gold_entity < c_ent;
        if (p.kind == (gold_is_entity ? AnswerKind::Entity : AnswerKind::Timestamp) &&
            p.index == (gold_is_entity ? gold_entity : gold_entity - c_ent)) {
            ++hits;
        }
    }
    const double rate = static_cast<double>(hits) / trials;
    // Expected 1/20 = 0.05; allow five sigma of binomial noise.
    const double sigma = std::sqrt(0.05 * 0.95 / trials);
    CHECK(std::abs(rate - 0.05) <= 5.0 * sigma);
}

TEST_CASE("training runs deterministically and learns on a small world") {
    PipelineFixture fx;
    TrainConfig config;
    config.dims = fx.dims;
    config.epochs = 6;
    config.batch_size = 16;
    config.seed = 5;
    config.lambda = 1.0;

    auto run = [&]() {
        ParamStore store;
        QaModel model = fx.make_model(store, 5);
        TrainResult result = train(fx.kg, fx.data.train, fx.data.dev, model, store, config);
        return result;
    };
    TrainResult a = run();
    TrainResult b = run();
    REQUIRE(a.curve.size() == 6);
    for (size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].total == b.curve[i].total);
        CHECK(a.curve[i].bce == b.curve[i].bce);
        CHECK(a.curve[i].atd == b.curve[i].atd);
    }
    // Loss decreases over training.
    CHECK(a.curve.back().total < a.curve.front().total);
}

TEST_CASE("lambda zero and one give structurally different curves") {
    PipelineFixture fx;
    TrainConfig config;
    config.dims = fx.dims;
    config.epochs = 2;
    config.batch_size = 16;
    config.seed = 7;

    auto curve = [&](double lambda) {
        ParamStore store;
        QaModel model = fx.make_model(store, 7);
        TrainConfig c = config;
        c.lambda = lambda;
        return train(fx.kg, fx.data.train, fx.data.dev, model, store, c).curve;
    };
    const auto c0 = curve(0.0);
    const auto c1 = curve(1.0);
    CHECK(c0[0].total != c1[0].total);
    CHECK(c1[0].total == doctest::Approx(c1[0].bce + c1[0].atd));
    CHECK(c0[0].total == doctest::Approx(c0[0].bce));
}

TEST_CASE("freezing the embedding tables keeps them bitwise unchanged") {
    PipelineFixture fx;
    ParamStore store;
    QaModel model = fx.make_model(store, 11);
    const Tensor ents_before = model.tkge.entities->value;
    const Tensor times_before = model.tkge.times->value;
    TrainConfig config;
    config.dims = fx.dims;
    config.epochs = 2;
    config.batch_size = 16;
    config.seed = 11;
    config.freeze_tkge = true;
    train(fx.kg, fx.data.train, fx.data.dev, model, store, config);
    for (size_t i = 0; i < ents_before.size(); ++i) {
        CHECK(model.tkge.entities->value[i] == ents_before[i]);
    }
    for (size_t i = 0; i < times_before.size(); ++i) {
        CHECK(model.tkge.times->value[i] == times_before[i]);
    }
}

TEST_CASE("checkpoint save and load round-trip bitwise") {
    PipelineFixture fx;
    ParamStore store;
    QaModel model = fx.make_model(store, 17);
    testutil::TempDir tmp("ckpt");

    CheckpointMeta meta;
    meta.seed = 17;
    meta.config_json = R"({"note":"test"})";
    meta.token_vocab = model.token_vocab.tokens();
    meta.entity_vocab = fx.kg.entities().names();
    meta.relation_vocab = fx.kg.relations().names();
    for (Year y : fx.kg.years()) meta.time_vocab.push_back(y);

    save_checkpoint(store, meta, tmp.file("model.ckpt"));
    LoadedCheckpoint loaded = load_checkpoint(tmp.file("model.ckpt"));
    CHECK(loaded.meta.seed == 17);
    CHECK(loaded.meta.token_vocab == meta.token_vocab);
    CHECK(loaded.tensors.size() == store.size());

    // save -> load -> save is byte-identical.
    ParamStore store2;
    QaModel model2 = fx.make_model(store2, 170);  // different init
    restore_params(store2, loaded);
    save_checkpoint(store2, loaded.meta, tmp.file("model2.ckpt"));
    CHECK(testutil::read_file(tmp.file("model.ckpt")) ==
          testutil::read_file(tmp.file("model2.ckpt")));

    // Evaluation before save equals evaluation after load exactly.
    EvalReport before = evaluate(model, fx.kg, fx.data.dev, FilterMode::Hard);
    EvalReport after = evaluate(model2, fx.kg, fx.data.dev, FilterMode::Hard);
    REQUIRE(before.per_question.size() == after.per_question.size());
    for (size_t i = 0; i < before.per_question.size(); ++i) {
        CHECK(before.per_question[i].scores.p_time == after.per_question[i].scores.p_time);
        CHECK(before.per_question[i].scores.entity_scores ==
              after.per_question[i].scores.entity_scores);
        CHECK(before.per_question[i].scores.time_scores ==
              after.per_question[i].scores.time_scores);
    }
}

TEST_CASE("truncated checkpoints are rejected without partial state") {
    PipelineFixture fx;
    ParamStore store;
    QaModel model = fx.make_model(store, 19);
    testutil::TempDir tmp("ckpt");
    save_checkpoint(store, CheckpointMeta{}, tmp.file("model.ckpt"));
    std::string bytes = testutil::read_file(tmp.file("model.ckpt"));
    bytes.resize(bytes.size() - 16);
    testutil::write_file(tmp.file("cut.ckpt"), bytes);
    CHECK_THROWS_AS(load_checkpoint(tmp.file("cut.ckpt")), CorruptionError);
}

TEST_CASE("report CSVs have documented headers and re-emit identically") {
    PipelineFixture fx;
    ParamStore store;
    QaModel model = fx.make_model(store, 23);
    EvalReport report = evaluate(model, fx.kg, fx.data.dev, FilterMode::Hard);
    report.loss_curve = {{3.0, 2.5, 0.5}, {2.0, 1.8, 0.2}};
    testutil::TempDir tmp("report");
    emit_report(report, tmp.dir() + "/");
    const std::string cat = testutil::read_file(tmp.dir() + "/hits_by_category.csv");
    const std::string cnt = testutil::read_file(tmp.dir() + "/hits_by_entity_count.csv");
    const std::string curve = testutil::read_file(tmp.dir() + "/loss_curve.csv");
    CHECK(cat.rfind("category,count,hits1\n", 0) == 0);
    CHECK(cnt.rfind("entities,count,hits1\n", 0) == 0);
    CHECK(curve.rfind("epoch,L,L1,L2\n", 0) == 0);
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);  // header + 2 epochs

    emit_report(report, tmp.dir() + "/again_");
    CHECK(testutil::read_file(tmp.dir() + "/again_hits_by_category.csv") == cat);
}

}  // TEST_SUITE
