#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gaprune {

// Dense row-major tensor of 64-bit reals. Rank is arbitrary but everything in
// this codebase is 1-D or 2-D. Values are plain storage; differentiation
// happens on the tape, not here.
struct tensor {
    std::vector<int64_t> shape;
    std::vector<double> values;

    tensor() = default;
    tensor(std::vector<int64_t> shape_, std::vector<double> values_);

    static tensor zeros(std::vector<int64_t> shape);
    static tensor full(std::vector<int64_t> shape, double v);
    static tensor scalar(double v);
    static tensor row(std::vector<double> v);
    static tensor matrix(int64_t r, int64_t c, std::vector<double> v);

    int64_t numel() const { return int64_t(values.size()); }
    int64_t rank() const { return int64_t(shape.size()); }
    bool is_scalar() const { return values.size() == 1; }

    // 2-D accessors; rows()/cols() require rank 2
    int64_t rows() const;
    int64_t cols() const;
    double & at(int64_t r, int64_t c) { return values[size_t(r * cols() + c)]; }
    double at(int64_t r, int64_t c) const { return values[size_t(r * cols() + c)]; }

    bool same_shape(const tensor & o) const { return shape == o.shape; }
    bool all_finite() const;

    std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int64_t> & shape);

} // namespace gaprune
