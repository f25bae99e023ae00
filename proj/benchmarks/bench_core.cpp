#include <benchmark/benchmark.h>

#include "chronoqa/pipeline.hpp"
#include "chronoqa/synth.hpp"
#include "chronoqa/tkge.hpp"

namespace {

using namespace chronoqa;

struct BenchWorld {
    WorldConfig config;
    TemporalKG kg;
    SynthDataset data;
    ParamStore store;
    QaModel model;

    BenchWorld() {
        config.questions_per_template = 40;
        kg = generate_world(config);
        data = split_dataset(generate_questions(kg, config));
        TokenVocab vocab = TokenVocab::build(data.train);
        ModelDims dims;
        model = build_qa_model(store, dims, vocab, kg.entities().size(), kg.relations().size(),
                               kg.num_timestamps(), 1);
    }
};

BenchWorld& bench_world() {
    static BenchWorld world;
    return world;
}

void BM_ScoreAllObjects(benchmark::State& state) {
    auto& w = bench_world();
    for (auto _ : state) {
        benchmark::DoNotOptimize(score_all_objects(w.model.tkge, 0, 0, 0));
    }
}
BENCHMARK(BM_ScoreAllObjects);

void BM_QuestionForward(benchmark::State& state) {
    auto& w = bench_world();
    const QuestionInstance& q = w.data.train.front();
    for (auto _ : state) {
        Tape tape;
        QuestionForward fwd = question_forward(tape, w.model, w.kg, q);
        benchmark::DoNotOptimize(tape.value(fwd.entity_scores).data());
    }
}
BENCHMARK(BM_QuestionForward);

void BM_QuestionTrainStep(benchmark::State& state) {
    auto& w = bench_world();
    const QuestionInstance& q = w.data.train.front();
    const Tensor labels = candidate_labels(q, w.kg.entities().size(), w.kg.num_timestamps());
    for (auto _ : state) {
        w.store.zero_grads();
        Tape tape;
        QuestionForward fwd = question_forward(tape, w.model, w.kg, q);
        Var l1 = bce_loss(tape, fwd.entity_scores, fwd.time_scores, labels);
        Var l2 = atd_loss(tape, fwd.p_time, q.answer_is_timestamp);
        Var loss = joint_loss(tape, l1, l2, 1.0);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.value(loss).item());
    }
}
BENCHMARK(BM_QuestionTrainStep);

void BM_PretrainQuadStep(benchmark::State& state) {
    auto& w = bench_world();
    const auto quads = w.kg.training_quadruples();
    size_t i = 0;
    for (auto _ : state) {
        const Quadruple& quad = quads[i++ % quads.size()];
        Tape tape;
        Var ents = tape.param(*w.model.tkge.entities);
        Var rels = tape.param(*w.model.tkge.relations);
        Var times = tape.param(*w.model.tkge.times);
        Var s_col = tape.transpose(tape.gather_rows(ents, {quad.subject}));
        Var r_col = tape.transpose(tape.gather_rows(rels, {quad.relation}));
        Var t_col = tape.transpose(tape.gather_rows(times, {quad.time}));
        Var scores = tape.matmul(ents, tape.complex_mul(s_col, tape.complex_mul(r_col, t_col)));
        Var loss = tape.ce_with_logits(scores, quad.object);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.value(loss).item());
    }
}
BENCHMARK(BM_PretrainQuadStep);

}  // namespace

BENCHMARK_MAIN();
