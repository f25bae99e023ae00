#include "chronoqa/tensor.hpp"

#include <cmath>
#include <sstream>

namespace chronoqa {

Tensor::Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
        throw DimensionError("tensor: dimensions must be >= 1, got " + std::to_string(rows) +
                             "x" + std::to_string(cols));
    }
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
}

Tensor::Tensor(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
        throw DimensionError("tensor: dimensions must be >= 1, got " + std::to_string(rows) +
                             "x" + std::to_string(cols));
    }
    if (data.size() != static_cast<size_t>(rows) * cols) {
        throw DimensionError("tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
    data_ = std::move(data);
}

Tensor Tensor::full(int rows, int cols, double value) {
    Tensor t(rows, cols);
    t.fill(value);
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::randn(int rows, int cols, Rng& rng, double mean, double stddev) {
    Tensor t(rows, cols);
    for (auto& x : t.data_) x = rng.normal(mean, stddev);
    return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
    return Tensor(1, static_cast<int>(values.size()), values);
}

Tensor Tensor::column(const std::vector<double>& values) {
    return Tensor(static_cast<int>(values.size()), 1, values);
}

double Tensor::item() const {
    if (rows_ != 1 || cols_ != 1) {
        throw ContractError("item: tensor is " + shape_str() + ", expected 1x1");
    }
    return data_[0];
}

void Tensor::fill(double value) {
    for (auto& x : data_) x = value;
}

void Tensor::add_in_place(const Tensor& other) {
    check_same_shape("add_in_place", *this, other);
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << rows_ << "x" << cols_;
    return os.str();
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
    }
}

}  // namespace chronoqa
