#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cyclosense/tensor.hpp"

// Stateless layer kernels. Image tensors are NHWC; a rank-3 HWC input is
// treated as a batch of one and the result keeps rank 3.
namespace cyclosense::nn {

// 3x3, stride 1, zero "same" padding.
//   y[n,i,j,c] = sum_{p,l,k} w[p,l,k,c] * x[n, i+p-1, j+l-1, k] + b[c]
// w has shape [3,3,Cin,Cout], b has shape [Cout].
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct ConvGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};
ConvGrads conv2d_backward(const Tensor& dy, const Tensor& x, const Tensor& w);

Tensor leaky_relu(const Tensor& x, double alpha = 0.1);
// Slope 1 for x >= 0, alpha below.
Tensor leaky_relu_backward(const Tensor& dy, const Tensor& x, double alpha = 0.1);

// 2x2 stride-2 max pooling, ceil mode: odd trailing rows/cols form shrunken
// windows. argmax holds the flat input index that won each output; ties go
// to the first element in row-major order.
struct PoolResult {
    Tensor y;
    std::vector<std::size_t> argmax;
};
PoolResult maxpool2x2(const Tensor& x);
Tensor maxpool2x2_backward(const Tensor& dy, std::span<const std::size_t> argmax,
                           const std::vector<std::size_t>& x_shape);

// x [B, in] (or [in]), w [in, out], b [out].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};
DenseGrads dense_backward(const Tensor& dy, const Tensor& x, const Tensor& w);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

struct LossResult {
    double loss = 0.0;
    std::vector<double> dlogits; // p - onehot(label)
};
LossResult softmax_cross_entropy(std::span<const double> logits, std::size_t label);

} // namespace cyclosense::nn
