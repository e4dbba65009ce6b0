#include "cyclosense/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cyclosense/error.hpp"

namespace cyclosense::nn {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive");
    }
}

void Tensor::reshape(std::vector<std::size_t> shape) {
    if (element_count(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::check_finite(const std::string& where) const {
    for (double v : data_) {
        if (!std::isfinite(v)) throw NumericalError("non-finite value in " + where);
    }
}

} // namespace cyclosense::nn
