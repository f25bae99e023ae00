#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "chronoqa/tensor.hpp"

namespace chronoqa {

// A named trainable tensor plus its accumulated gradient and the optimizer's
// per-parameter moment accumulators.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor moment1;
    Tensor moment2;
    bool trainable = true;
    // Per-parameter multiplier on the optimizer step (discriminative
    // fine-tuning: pretrained tables move slower than fresh heads).
    double lr_scale = 1.0;

    Param(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.rows(), value.cols()),
          moment1(value.rows(), value.cols()),
          moment2(value.rows(), value.cols()) {}
};

// Owns all parameters of a model in registration order. Iteration order is
// deterministic, which the optimizer and the checkpoint format rely on.
class ParamStore {
public:
    Param& create(const std::string& name, Tensor init);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    size_t size() const { return items_.size(); }
    Param& operator[](size_t i) { return *items_[i]; }
    const Param& operator[](size_t i) const { return *items_[i]; }

    void zero_grads();
    // Total number of scalar parameters.
    size_t scalar_count() const;

private:
    std::vector<std::unique_ptr<Param>> items_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace chronoqa
