#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "chronoqa/errors.hpp"
#include "chronoqa/rng.hpp"

namespace chronoqa {

// Dense row-major matrix of 64-bit floats. Everything in the engine is 2-D:
// scalars are 1x1, column vectors are n x 1, embedding tables are count x dim.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols);
    Tensor(int rows, int cols, std::vector<double> data);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double value);
    static Tensor identity(int n);
    static Tensor scalar(double value) { return Tensor(1, 1, {value}); }
    // Entries drawn i.i.d. from N(mean, stddev^2).
    static Tensor randn(int rows, int cols, Rng& rng, double mean = 0.0, double stddev = 1.0);
    static Tensor row(const std::vector<double>& values);
    static Tensor column(const std::vector<double>& values);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool same_shape(const Tensor& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    // Scalar accessor; throws ContractError unless the tensor is 1x1.
    double item() const;

    void fill(double value);
    void add_in_place(const Tensor& other);
    bool all_finite() const;

    std::string shape_str() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Throws DimensionError naming `op` when the shapes disagree.
void check_same_shape(const char* op, const Tensor& a, const Tensor& b);

}  // namespace chronoqa
