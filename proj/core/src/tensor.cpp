#include "gaprune/tensor.hpp"

#include "gaprune/errors.hpp"

#include <cmath>
#include <sstream>

namespace gaprune {

int64_t shape_numel(const std::vector<int64_t> & shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) {
            throw shape_error("tensor dimensions must be positive, got " + std::to_string(d));
        }
        n *= d;
    }
    return n;
}

tensor::tensor(std::vector<int64_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
    if (shape_numel(shape) != int64_t(values.size())) {
        throw shape_error("shape " + shape_str() + " does not match value count " +
                          std::to_string(values.size()));
    }
}

tensor tensor::zeros(std::vector<int64_t> shape) {
    const int64_t n = shape_numel(shape);
    return tensor(std::move(shape), std::vector<double>(size_t(n), 0.0));
}

tensor tensor::full(std::vector<int64_t> shape, double v) {
    const int64_t n = shape_numel(shape);
    return tensor(std::move(shape), std::vector<double>(size_t(n), v));
}

tensor tensor::scalar(double v) {
    return tensor({1}, {v});
}

tensor tensor::row(std::vector<double> v) {
    const int64_t n = int64_t(v.size());
    return tensor({n}, std::move(v));
}

tensor tensor::matrix(int64_t r, int64_t c, std::vector<double> v) {
    return tensor({r, c}, std::move(v));
}

int64_t tensor::rows() const {
    if (rank() != 2) {
        throw shape_error("rows() on tensor of shape " + shape_str());
    }
    return shape[0];
}

int64_t tensor::cols() const {
    if (rank() != 2) {
        throw shape_error("cols() on tensor of shape " + shape_str());
    }
    return shape[1];
}

bool tensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

std::string tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

} // namespace gaprune
