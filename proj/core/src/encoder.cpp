#include "chronoqa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chronoqa/errors.hpp"

namespace chronoqa {

EncoderModel EncoderModel::create(ParamStore& store, const ModelDims& dims, int vocab_size,
                                  Rng& rng, double init_stddev) {
    if (dims.d % 2 != 0) {
        throw ContractError("encoder: D must be even, got " + std::to_string(dims.d));
    }
    if (dims.d % dims.heads != 0) {
        throw ContractError("encoder: D must be divisible by the head count");
    }
    if (dims.layers < 1) throw ContractError("encoder: at least one layer required");

    auto randn = [&](int r, int c) { return Tensor::randn(r, c, rng, 0.0, init_stddev); };
    // Substitution projections start at the identity so grounded entity and
    // timestamp embeddings pass through unrotated; zero-mean starts leave the
    // time-attention logits uncorrelated with the grounded year and the
    // attention heads cannot bootstrap.
    auto eye = [](int r, int c) {
        Tensor t(r, c);
        for (int i = 0; i < std::min(r, c); ++i) t.at(i, i) = 1.0;
        return t;
    };
    EncoderModel enc;
    enc.dims = dims;
    enc.token_table = &store.create("encoder.token_table", randn(vocab_size, dims.d_b));
    enc.w_b = &store.create("encoder.w_b", eye(dims.d, dims.d_b));
    enc.w_e = &store.create("encoder.w_e", eye(dims.d, dims.d));
    enc.w_t = &store.create("encoder.w_t", eye(dims.d, dims.d));
    enc.w_st = &store.create("encoder.w_st", randn(dims.d, dims.d));
    enc.w_et = &store.create("encoder.w_et", randn(dims.d, dims.d));
    enc.unknown_time = &store.create("encoder.unknown_time", randn(1, dims.d));
    const int ff = dims.ff_mult * dims.d;
    for (int l = 0; l < dims.layers; ++l) {
        const std::string prefix = "encoder.layer" + std::to_string(l) + ".";
        EncoderLayerParams layer;
        layer.wq = &store.create(prefix + "wq", randn(dims.d, dims.d));
        layer.wk = &store.create(prefix + "wk", randn(dims.d, dims.d));
        layer.wv = &store.create(prefix + "wv", randn(dims.d, dims.d));
        layer.wo = &store.create(prefix + "wo", randn(dims.d, dims.d));
        layer.ln1_gain = &store.create(prefix + "ln1_gain", Tensor::full(dims.d, 1, 1.0));
        layer.ln1_bias = &store.create(prefix + "ln1_bias", Tensor(dims.d, 1));
        layer.ff_w1 = &store.create(prefix + "ff_w1", randn(ff, dims.d));
        layer.ff_b1 = &store.create(prefix + "ff_b1", Tensor(ff, 1));
        layer.ff_w2 = &store.create(prefix + "ff_w2", randn(dims.d, ff));
        layer.ff_b2 = &store.create(prefix + "ff_b2", Tensor(dims.d, 1));
        layer.ln2_gain = &store.create(prefix + "ln2_gain", Tensor::full(dims.d, 1, 1.0));
        layer.ln2_bias = &store.create(prefix + "ln2_bias", Tensor(dims.d, 1));
        enc.layers.push_back(layer);
    }
    return enc;
}

Var embed_tokens(Tape& tape, const EncoderModel& enc, const std::vector<int>& token_ids) {
    if (token_ids.empty() || token_ids[0] != kClsId) {
        throw ContractError("embed_tokens: token ids must start with [CLS]");
    }
    Var rows = tape.gather_rows(tape.param(*enc.token_table), token_ids);  // N x D_B
    return tape.matmul(tape.param(*enc.w_b), tape.transpose(rows));       // D x N
}

namespace {

// Spans tagged with the replacement column they map to, sorted by position.
struct ColumnPatch {
    int begin;  // inclusive, in [CLS]-shifted coordinates
    int end;    // exclusive
    Var column; // D x 1 replacement (substitution) or additive term (fusion)
};

// Replaces patched column ranges of `base` (D x N) and keeps the rest.
Var patch_columns(Tape& tape, Var base, std::vector<ColumnPatch> patches) {
    const int n = tape.value(base).cols();
    std::sort(patches.begin(), patches.end(),
              [](const ColumnPatch& a, const ColumnPatch& b) { return a.begin < b.begin; });
    std::vector<Var> segments;
    int cursor = 0;
    for (const auto& patch : patches) {
        if (patch.begin > cursor) segments.push_back(tape.slice_cols(base, cursor, patch.begin));
        Var ones = tape.constant(Tensor::full(1, patch.end - patch.begin, 1.0));
        segments.push_back(tape.matmul(patch.column, ones));
        cursor = patch.end;
    }
    if (cursor < n) segments.push_back(tape.slice_cols(base, cursor, n));
    return segments.size() == 1 ? segments[0] : tape.concat_cols(segments);
}

// Additive overlay: zeros outside the patch ranges.
Var overlay_columns(Tape& tape, Var base, std::vector<ColumnPatch> patches) {
    const int n = tape.value(base).cols();
    const int d = tape.value(base).rows();
    std::sort(patches.begin(), patches.end(),
              [](const ColumnPatch& a, const ColumnPatch& b) { return a.begin < b.begin; });
    std::vector<Var> segments;
    int cursor = 0;
    for (const auto& patch : patches) {
        if (patch.begin > cursor) {
            segments.push_back(tape.constant(Tensor(d, patch.begin - cursor)));
        }
        Var ones = tape.constant(Tensor::full(1, patch.end - patch.begin, 1.0));
        segments.push_back(tape.matmul(patch.column, ones));
        cursor = patch.end;
    }
    if (cursor < n) segments.push_back(tape.constant(Tensor(d, n - cursor)));
    Var overlay = segments.size() == 1 ? segments[0] : tape.concat_cols(segments);
    return tape.add(base, overlay);
}

Var table_row_as_column(Tape& tape, Param& table, int row) {
    return tape.transpose(tape.gather_rows(tape.param(table), {row}));
}

}  // namespace

Var substitute(Tape& tape, const EncoderModel& enc, const TkgeModel& tkge, Var q_b,
               const std::vector<EntitySpan>& entity_spans,
               const std::vector<TimeSpan>& time_spans) {
    std::vector<ColumnPatch> patches;
    for (const auto& span : entity_spans) {
        Var e_col = table_row_as_column(tape, *tkge.entities, span.entity);
        patches.push_back({span.begin + 1, span.end + 1, tape.matmul(tape.param(*enc.w_e), e_col)});
    }
    for (const auto& span : time_spans) {
        Var t_col = table_row_as_column(tape, *tkge.times, span.time);
        patches.push_back({span.begin + 1, span.end + 1, tape.matmul(tape.param(*enc.w_t), t_col)});
    }
    if (patches.empty()) return q_b;
    return patch_columns(tape, q_b, std::move(patches));
}

Var fuse_time(Tape& tape, const EncoderModel& enc, const TkgeModel& tkge, Var q_e,
              const std::vector<EntitySpan>& entity_spans,
              const std::vector<TimeScope>& scopes) {
    if (entity_spans.size() != scopes.size()) {
        throw ContractError("fuse_time: one scope per entity span required");
    }
    if (entity_spans.empty()) return q_e;
    std::vector<ColumnPatch> patches;
    for (size_t i = 0; i < entity_spans.size(); ++i) {
        const auto& span = entity_spans[i];
        const auto& scope = scopes[i];
        Var start_col = scope.start
                            ? table_row_as_column(tape, *tkge.times, *scope.start)
                            : tape.transpose(tape.param(*enc.unknown_time));
        Var end_col = scope.end ? table_row_as_column(tape, *tkge.times, *scope.end)
                                : tape.transpose(tape.param(*enc.unknown_time));
        Var fusion = tape.add(tape.matmul(tape.param(*enc.w_st), start_col),
                              tape.matmul(tape.param(*enc.w_et), end_col));
        patches.push_back({span.begin + 1, span.end + 1, fusion});
    }
    return overlay_columns(tape, q_e, std::move(patches));
}

Var encode(Tape& tape, const EncoderModel& enc, Var q_t) {
    const int d = enc.dims.d;
    if (tape.value(q_t).rows() != d || tape.value(q_t).cols() < 1) {
        throw ContractError("encode: input must be D x N with N >= 1");
    }
    const int heads = enc.dims.heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Var x = q_t;
    for (const auto& layer : enc.layers) {
        Var q = tape.matmul(tape.param(*layer.wq), x);
        Var k = tape.matmul(tape.param(*layer.wk), x);
        Var v = tape.matmul(tape.param(*layer.wv), x);
        std::vector<Var> head_outputs;
        for (int h = 0; h < heads; ++h) {
            Var qh = tape.slice_rows(q, h * dh, (h + 1) * dh);
            Var kh = tape.slice_rows(k, h * dh, (h + 1) * dh);
            Var vh = tape.slice_rows(v, h * dh, (h + 1) * dh);
            Var logits = tape.scalar_mul(tape.matmul(tape.transpose(qh), kh), scale);
            Var attn = tape.softmax_rows(logits);
            head_outputs.push_back(tape.matmul(vh, tape.transpose(attn)));
        }
        Var merged = heads == 1 ? head_outputs[0] : tape.concat_rows(head_outputs);
        Var mha = tape.matmul(tape.param(*layer.wo), merged);
        Var x1 = tape.layer_norm_cols(tape.add(x, mha), tape.param(*layer.ln1_gain),
                                      tape.param(*layer.ln1_bias));
        Var hidden = tape.gelu(
            tape.add_colvec(tape.matmul(tape.param(*layer.ff_w1), x1), tape.param(*layer.ff_b1)));
        Var ff = tape.add_colvec(tape.matmul(tape.param(*layer.ff_w2), hidden),
                                 tape.param(*layer.ff_b2));
        x = tape.layer_norm_cols(tape.add(x1, ff), tape.param(*layer.ln2_gain),
                                 tape.param(*layer.ln2_bias));
    }
    return tape.slice_cols(x, 0, 1);
}

Var encode_question(Tape& tape, const EncoderModel& enc, const TkgeModel& tkge,
                    const TemporalKG& kg, const TokenVocab& vocab, const QuestionInstance& q) {
    std::vector<int> ids;
    ids.reserve(q.tokens.size() + 1);
    ids.push_back(kClsId);
    for (const auto& tok : q.tokens) ids.push_back(vocab.encode_token(tok));
    Var q_b = embed_tokens(tape, enc, ids);
    Var q_e = substitute(tape, enc, tkge, q_b, q.entity_spans, q.time_spans);
    std::vector<TimeScope> scopes;
    scopes.reserve(q.entity_spans.size());
    for (const auto& span : q.entity_spans) scopes.push_back(kg.entity_time_scope(span.entity));
    Var q_t = fuse_time(tape, enc, tkge, q_e, q.entity_spans, scopes);
    return encode(tape, enc, q_t);
}

}  // namespace chronoqa
