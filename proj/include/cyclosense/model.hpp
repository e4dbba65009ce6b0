#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cyclosense/tensor.hpp"

namespace cyclosense::nn {

struct Conv2DSpec {
    std::size_t out_channels = 0;
};
struct LeakyReluSpec {
    double alpha = 0.1;
};
struct MaxPoolSpec {};
struct FlattenSpec {};
struct DenseSpec {
    std::size_t out_dim = 0;
};

using LayerSpec = std::variant<Conv2DSpec, LeakyReluSpec, MaxPoolSpec, FlattenSpec, DenseSpec>;

// Conv(64) LReLU Pool, Conv(128) LReLU Pool, Conv(64) LReLU Pool, Flatten,
// Dense(256) LReLU, Dense(num_classes).
std::vector<LayerSpec> default_stack(std::size_t num_classes, double leaky_alpha = 0.1);

struct LedgerRow {
    std::string name;                 // "Conv1", "Leaky ReLU1", "Max_Pool1", ...
    std::vector<std::size_t> shape;   // per-example output shape
    std::size_t parameters = 0;
};

// Output shape and parameter count of every layer for an HWC input, computed
// without allocating weights.
std::vector<LedgerRow> shape_ledger(std::span<const LayerSpec> specs,
                                    const std::vector<std::size_t>& input_hwc);
std::size_t count_parameters(std::span<const LayerSpec> specs, const std::vector<std::size_t>& input_hwc);

// A trainable tensor with its gradient and Adam moments.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;

    explicit Param(Tensor init = {});
};

class Model {
public:
    Model() = default;
    // He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    Model(std::vector<LayerSpec> specs, std::vector<std::size_t> input_hwc, std::uint64_t seed);

    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    const std::vector<std::size_t>& input_shape() const noexcept { return input_hwc_; }
    std::size_t num_classes() const noexcept { return num_classes_; }

    // Pure inference on [B,H,W,C] (or [H,W,C]); returns logits [B, K].
    Tensor infer(const Tensor& x) const;

    // Training forward: keeps activations for backward().
    Tensor forward(const Tensor& x);
    // Accumulates into Param::grad (call zero_grad() first).
    void backward(const Tensor& dlogits);
    void release_cache();

    void zero_grad();
    std::vector<Param*> params();
    std::vector<const Param*> params() const;
    std::size_t parameter_count() const;

    std::uint64_t adam_steps = 0;

    bool operator==(const Model& other) const;

private:
    struct LayerState {
        std::vector<Param> params; // conv/dense: {weight, bias}
        Tensor cached_input;
        std::vector<std::size_t> pool_argmax;
    };

    std::vector<LayerSpec> specs_;
    std::vector<std::size_t> input_hwc_;
    std::size_t num_classes_ = 0;
    std::vector<LayerState> layers_;
};

} // namespace cyclosense::nn
