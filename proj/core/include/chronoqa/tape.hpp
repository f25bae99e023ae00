#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "chronoqa/params.hpp"
#include "chronoqa/tensor.hpp"

namespace chronoqa {

class Tape;

// Handle to a node on a Tape. Only valid for the tape that created it.
struct Var {
    int idx = -1;
};

// Reverse-mode differentiation tape. Ops execute eagerly and record a
// backward closure; backward() replays the closures in exact reverse
// execution order, accumulating adjoints additively, and finally adds each
// bound parameter's adjoint into Param::grad.
//
// Complex-valued ops use the real layout convention: a vector of even length
// D holds D/2 complex components, entries [0, D/2) are the real parts and
// [D/2, D) the imaginary parts.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves.
    Var param(Param& p);           // value aliased, adjoint flows into p.grad
    Var constant(Tensor value);    // no parameter binding

    // Elementwise and scalar ops.
    Var add(Var a, Var b);
    Var add_colvec(Var x, Var v);  // x: RxC, v: Rx1 added to every column
    Var mul(Var a, Var b);         // elementwise
    Var scalar_mul(Var a, double c);
    Var sigmoid(Var a);
    Var gelu(Var a);

    // Linear algebra and layout.
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var gather_rows(Var table, const std::vector<int>& rows);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_rows(Var a, int begin, int end);
    Var slice_cols(Var a, int begin, int end);

    // Reductions and normalizations.
    Var sum(Var a);
    Var mean(Var a);
    Var softmax_rows(Var a);  // softmax over the last axis, row by row
    Var layer_norm_cols(Var x, Var gain, Var bias);  // per-column normalization

    // Complex-layout ops (vector-shaped inputs, even total size).
    Var complex_mul(Var a, Var b);
    Var complex_conj(Var a);
    Var complex_abs3_sum(Var a);  // sum over components of |z|^3

    // Fused losses.
    Var bce_with_logits(Var scores, Tensor labels);     // multi-hot labels
    Var ce_with_logits(Var scores, int target_index);   // multiclass CE

    const Tensor& value(Var v) const;
    // Adjoint of a node; valid after backward().
    const Tensor& grad(Var v) const;

    // Runs reverse-mode accumulation from a scalar loss node. Parameters not
    // reachable from the loss keep a zero adjoint contribution.
    void backward(Var loss);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor owned;
        const Tensor* external = nullptr;  // set for param leaves
        Tensor adjoint;
        bool adjoint_ready = false;
        Param* bound = nullptr;
        std::function<void(Tape&, int)> back;  // may be empty (leaves/constants)

        const Tensor& val() const { return external ? *external : owned; }
    };

    int push(Node node);
    const Tensor& val(int idx) const { return nodes_[idx].val(); }
    Tensor& adj(int idx);
    void check_vector_pair(const char* op, Var a, Var b) const;

    std::vector<Node> nodes_;
    std::unordered_map<const Param*, int> param_nodes_;
};

}  // namespace chronoqa
