#include <cmath>
#include <vector>

#include "doctest.h"

#include "chronoqa/optimizer.hpp"
#include "chronoqa/tape.hpp"
#include "testutil.hpp"

using namespace chronoqa;

TEST_SUITE("numerics") {

TEST_CASE("tensor shape contracts") {
    CHECK_THROWS_AS(Tensor(0, 3), DimensionError);
    CHECK_THROWS_AS(Tensor(2, 2, {1.0}), DimensionError);
    Tensor t(2, 3);
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(t.item(), ContractError);
    CHECK(Tensor::scalar(4.0).item() == 4.0);
}

TEST_CASE("softmax of a constant row is uniform for any constant") {
    for (double c : {-100.0, -1.0, 0.0, 0.5, 42.0, 1e6}) {
        Tape tape;
        Var x = tape.constant(Tensor::row({c, c, c}));
        Var y = tape.softmax_rows(x);
        for (int i = 0; i < 3; ++i) {
            CHECK(tape.value(y)[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    Rng rng(11);
    for (int it = 0; it < 200; ++it) {
        const int rows = 1 + static_cast<int>(rng.uniform_int(4));
        const int cols = 1 + static_cast<int>(rng.uniform_int(8));
        Tape tape;
        Var x = tape.constant(Tensor::randn(rows, cols, rng, 0.0, 20.0));
        const Tensor& y = tape.value(tape.softmax_rows(x));
        for (int r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (int c = 0; c < cols; ++c) {
                CHECK(y.at(r, c) >= 0.0);
                sum += y.at(r, c);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("sigmoid at zero") {
    Tape tape;
    Var y = tape.sigmoid(tape.constant(Tensor::scalar(0.0)));
    CHECK(tape.value(y).item() == 0.5);
}

TEST_CASE("matmul with the identity is the identity map") {
    Rng rng(3);
    Tensor x = Tensor::randn(4, 5, rng);
    Tape tape;
    Var y = tape.matmul(tape.constant(Tensor::identity(4)), tape.constant(x));
    for (size_t i = 0; i < x.size(); ++i) CHECK(tape.value(y)[i] == x[i]);
}

TEST_CASE("shape mismatch errors name the op") {
    Tape tape;
    Var a = tape.constant(Tensor(2, 3));
    Var b = tape.constant(Tensor(3, 3));
    CHECK_THROWS_WITH_AS(tape.add(a, b), doctest::Contains("add"), DimensionError);
    CHECK_THROWS_WITH_AS(tape.matmul(a, a), doctest::Contains("matmul"), DimensionError);
}

TEST_CASE("sigmoid derivative at zero is a quarter") {
    ParamStore store;
    Param& x = store.create("x", Tensor::scalar(0.0));
    Tape tape;
    Var loss = tape.sigmoid(tape.param(x));
    tape.backward(loss);
    CHECK(x.grad.item() == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("gradient of sum is all ones") {
    ParamStore store;
    Param& x = store.create("x", Tensor(3, 4));
    Tape tape;
    tape.backward(tape.sum(tape.param(x)));
    for (size_t i = 0; i < x.grad.size(); ++i) CHECK(x.grad[i] == 1.0);
}

TEST_CASE("shared subexpressions accumulate: grad of x+x is 2") {
    ParamStore store;
    Param& x = store.create("x", Tensor::scalar(1.5));
    Tape tape;
    Var leaf = tape.param(x);
    tape.backward(tape.add(leaf, leaf));
    CHECK(x.grad.item() == 2.0);
}

TEST_CASE("backward rejects non-scalar losses") {
    Tape tape;
    Var x = tape.constant(Tensor(2, 2));
    CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("parameters unreachable from the loss keep zero gradients") {
    ParamStore store;
    Param& used = store.create("used", Tensor::scalar(2.0));
    Param& unused = store.create("unused", Tensor::scalar(3.0));
    Tape tape;
    tape.param(unused);
    tape.backward(tape.sum(tape.param(used)));
    CHECK(used.grad.item() == 1.0);
    CHECK(unused.grad.item() == 0.0);
}

// Randomized finite-difference sweep across every differentiable op. Each
// iteration draws fresh shapes and values; the loss is a weighted sum so the
// incoming adjoint is non-uniform.
TEST_CASE("per-op gradients match central finite differences") {
    Rng rng(1234);
    int total_checked = 0;
    for (int it = 0; it < 120; ++it) {
        const int rows = 2 + static_cast<int>(rng.uniform_int(3));
        const int cols = 2 + static_cast<int>(rng.uniform_int(3));
        const int even = 2 * (1 + static_cast<int>(rng.uniform_int(3)));

        ParamStore store;
        Param& a = store.create("a", Tensor::randn(rows, cols, rng));
        Param& b = store.create("b", Tensor::randn(rows, cols, rng));
        Param& m = store.create("m", Tensor::randn(cols, rows, rng));
        Param& v = store.create("v", Tensor::randn(rows, 1, rng));
        Param& ca = store.create("ca", Tensor::randn(even, 1, rng));
        Param& cb = store.create("cb", Tensor::randn(even, 1, rng));
        Param& gain = store.create("gain", Tensor::randn(rows, 1, rng, 1.0, 0.2));
        Param& bias = store.create("bias", Tensor::randn(rows, 1, rng, 0.0, 0.2));

        const Tensor w_ab = Tensor::randn(rows, cols, rng);
        const Tensor w_sq = Tensor::randn(rows, rows, rng);
        const Tensor w_cx = Tensor::randn(even, 1, rng);
        Tensor labels(rows * 2, 1);
        labels.at(static_cast<int>(rng.uniform_int(static_cast<uint64_t>(rows * 2))), 0) = 1.0;
        const int target = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(even)));

        const Tensor w_tr = Tensor::randn(cols, rows, rng);

        auto loss_fn = [&](bool with_grad) {
            Tape tape;
            Var va = tape.param(a);
            Var vb = tape.param(b);
            Var vm = tape.param(m);
            Var vv = tape.param(v);
            Var vca = tape.param(ca);
            Var vcb = tape.param(cb);

            std::vector<Var> pieces;
            auto weigh = [&](Var x, const Tensor& w) {
                pieces.push_back(tape.sum(tape.mul(x, tape.constant(w))));
            };
            weigh(tape.add(va, vb), w_ab);
            weigh(tape.mul(va, vb), w_ab);
            weigh(tape.scalar_mul(va, 1.7), w_ab);
            weigh(tape.add_colvec(va, vv), w_ab);
            weigh(tape.sigmoid(va), w_ab);
            weigh(tape.gelu(va), w_ab);
            weigh(tape.matmul(va, vm), w_sq);
            weigh(tape.transpose(va), w_tr);
            weigh(tape.softmax_rows(va), w_ab);
            weigh(tape.layer_norm_cols(va, tape.param(gain), tape.param(bias)), w_ab);
            pieces.push_back(tape.sum(tape.slice_rows(va, 0, rows - 1)));
            pieces.push_back(tape.sum(tape.slice_cols(va, 1, cols)));
            pieces.push_back(tape.sum(tape.concat_rows({va, vb})));
            pieces.push_back(tape.sum(tape.concat_cols({va, vb})));
            pieces.push_back(tape.sum(tape.gather_rows(va, {0, rows - 1, 0})));
            pieces.push_back(tape.mean(va));
            weigh(tape.complex_mul(vca, vcb), w_cx);
            weigh(tape.complex_conj(vca), w_cx);
            pieces.push_back(tape.complex_abs3_sum(vca));
            pieces.push_back(tape.bce_with_logits(tape.concat_rows({vv, vv}), labels));
            pieces.push_back(tape.ce_with_logits(vca, target));

            Var total = pieces[0];
            for (size_t i = 1; i < pieces.size(); ++i) total = tape.add(total, pieces[i]);
            const double value = tape.value(total).item();
            if (with_grad) tape.backward(total);
            return value;
        };

        auto stats = testutil::grad_check_store(store, loss_fn, rng, 1, 1e-6);
        total_checked += stats.checked;
        CHECK_MESSAGE(stats.failed == 0, "iteration ", it, ": worst ", stats.worst_rel, " in ",
                      stats.worst_param);
    }
    CHECK(total_checked >= 100);
}

TEST_CASE("optimizer leaves parameters unchanged on zero gradients") {
    ParamStore store;
    Param& x = store.create("x", Tensor::row({1.0, -2.0, 3.0}));
    const Tensor before = x.value;
    AdamOptimizer opt;
    opt.step(store);
    for (size_t i = 0; i < before.size(); ++i) CHECK(x.value[i] == before[i]);
}

TEST_CASE("first optimizer step with unit gradient moves by the learning rate") {
    ParamStore store;
    Param& x = store.create("x", Tensor::scalar(0.0));
    x.grad.fill(1.0);
    AdamConfig config;
    AdamOptimizer opt(config);
    opt.step(store);
    // Bias-corrected first step: lr * 1 / (1 + eps).
    CHECK(std::abs(-x.value.item() - config.learning_rate) <= config.learning_rate * 1e-6);
}

TEST_CASE("optimizer is deterministic") {
    auto run = []() {
        ParamStore store;
        Param& x = store.create("x", Tensor::row({0.5, -0.25}));
        AdamOptimizer opt;
        for (int i = 0; i < 10; ++i) {
            x.grad = Tensor::row({0.1 * (i + 1), -0.2});
            opt.step(store);
        }
        return x.value;
    };
    const Tensor a = run();
    const Tensor b = run();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("optimizer fails fast on non-finite gradients") {
    ParamStore store;
    Param& x = store.create("x", Tensor::scalar(0.0));
    x.grad.fill(std::nan(""));
    AdamOptimizer opt;
    CHECK_THROWS_AS(opt.step(store), TrainingError);
}

TEST_CASE("frozen parameters are skipped entirely") {
    ParamStore store;
    Param& x = store.create("x", Tensor::scalar(1.0));
    x.trainable = false;
    x.grad.fill(5.0);
    AdamOptimizer opt;
    opt.step(store);
    CHECK(x.value.item() == 1.0);
    CHECK(x.moment1.item() == 0.0);
}

}  // TEST_SUITE
