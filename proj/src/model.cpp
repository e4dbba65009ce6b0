#include "cyclosense/model.hpp"

#include <cmath>

#include "cyclosense/error.hpp"
#include "cyclosense/nn_ops.hpp"
#include "cyclosense/rng.hpp"

namespace cyclosense::nn {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::size_t> with_batch(std::size_t n, const std::vector<std::size_t>& shape) {
    std::vector<std::size_t> out{n};
    out.insert(out.end(), shape.begin(), shape.end());
    return out;
}

Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
    return t;
}

} // namespace

std::vector<LayerSpec> default_stack(std::size_t num_classes, double leaky_alpha) {
    return {Conv2DSpec{64},  LeakyReluSpec{leaky_alpha}, MaxPoolSpec{},
            Conv2DSpec{128}, LeakyReluSpec{leaky_alpha}, MaxPoolSpec{},
            Conv2DSpec{64},  LeakyReluSpec{leaky_alpha}, MaxPoolSpec{},
            FlattenSpec{},   DenseSpec{256},             LeakyReluSpec{leaky_alpha},
            DenseSpec{num_classes}};
}

std::vector<LedgerRow> shape_ledger(std::span<const LayerSpec> specs,
                                    const std::vector<std::size_t>& input_hwc) {
    if (input_hwc.size() != 3) throw ShapeError("input shape must be HWC");
    std::vector<LedgerRow> rows;
    rows.push_back({"Input", input_hwc, 0});
    std::vector<std::size_t> shape = input_hwc;
    int conv = 0, relu = 0, pool = 0, dense = 0;
    for (const auto& spec : specs) {
        LedgerRow row;
        std::visit(overloaded{
                       [&](const Conv2DSpec& s) {
                           if (shape.size() != 3) throw ShapeError("Conv2D needs an image input");
                           row.name = "Conv" + std::to_string(++conv);
                           row.parameters = 9 * shape[2] * s.out_channels + s.out_channels;
                           shape[2] = s.out_channels;
                       },
                       [&](const LeakyReluSpec&) { row.name = "Leaky ReLU" + std::to_string(++relu); },
                       [&](const MaxPoolSpec&) {
                           if (shape.size() != 3) throw ShapeError("MaxPool needs an image input");
                           row.name = "Max_Pool" + std::to_string(++pool);
                           shape[0] = (shape[0] + 1) / 2;
                           shape[1] = (shape[1] + 1) / 2;
                       },
                       [&](const FlattenSpec&) {
                           row.name = "Flatten";
                           shape = {element_count(shape)};
                       },
                       [&](const DenseSpec& s) {
                           if (shape.size() != 1) throw ShapeError("Dense needs a flat input");
                           row.name = "Dense" + std::to_string(++dense);
                           row.parameters = shape[0] * s.out_dim + s.out_dim;
                           shape = {s.out_dim};
                       },
                   },
                   spec);
        row.shape = shape;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::size_t count_parameters(std::span<const LayerSpec> specs, const std::vector<std::size_t>& input_hwc) {
    std::size_t total = 0;
    for (const auto& row : shape_ledger(specs, input_hwc)) total += row.parameters;
    return total;
}

Param::Param(Tensor init) : value(std::move(init)) {
    if (value.size() > 0) {
        grad = Tensor(value.shape());
        m = Tensor(value.shape());
        v = Tensor(value.shape());
    }
}

Model::Model(std::vector<LayerSpec> specs, std::vector<std::size_t> input_hwc, std::uint64_t seed)
    : specs_(std::move(specs)), input_hwc_(std::move(input_hwc)) {
    const auto ledger = shape_ledger(specs_, input_hwc_);
    if (ledger.back().shape.size() != 1) throw ShapeError("model must end in a flat output");
    num_classes_ = ledger.back().shape[0];

    Rng rng(seed);
    std::vector<std::size_t> shape = input_hwc_;
    layers_.resize(specs_.size());
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        auto& layer = layers_[i];
        std::visit(overloaded{
                       [&](const Conv2DSpec& s) {
                           const std::size_t cin = shape[2];
                           layer.params.emplace_back(he_uniform({3, 3, cin, s.out_channels}, 9 * cin, rng));
                           layer.params.emplace_back(Tensor({s.out_channels}));
                       },
                       [&](const DenseSpec& s) {
                           layer.params.emplace_back(he_uniform({shape[0], s.out_dim}, shape[0], rng));
                           layer.params.emplace_back(Tensor({s.out_dim}));
                       },
                       [](const auto&) {},
                   },
                   specs_[i]);
        shape = ledger[i + 1].shape;
    }
}

Tensor Model::infer(const Tensor& input) const {
    Tensor x = input;
    if (x.rank() == 3) x.reshape(with_batch(1, x.shape()));
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& layer = layers_[i];
        x = std::visit(overloaded{
                           [&](const Conv2DSpec&) {
                               return conv2d_forward(x, layer.params[0].value, layer.params[1].value);
                           },
                           [&](const LeakyReluSpec& s) { return leaky_relu(x, s.alpha); },
                           [&](const MaxPoolSpec&) { return maxpool2x2(x).y; },
                           [&](const FlattenSpec&) {
                               Tensor y = x;
                               y.reshape({x.dim(0), x.size() / x.dim(0)});
                               return y;
                           },
                           [&](const DenseSpec&) {
                               return dense_forward(x, layer.params[0].value, layer.params[1].value);
                           },
                       },
                       specs_[i]);
    }
    return x;
}

Tensor Model::forward(const Tensor& input) {
    Tensor x = input;
    if (x.rank() == 3) x.reshape(with_batch(1, x.shape()));
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        auto& layer = layers_[i];
        Tensor y = std::visit(overloaded{
                                  [&](const Conv2DSpec&) {
                                      return conv2d_forward(x, layer.params[0].value, layer.params[1].value);
                                  },
                                  [&](const LeakyReluSpec& s) { return leaky_relu(x, s.alpha); },
                                  [&](const MaxPoolSpec&) {
                                      auto r = maxpool2x2(x);
                                      layer.pool_argmax = std::move(r.argmax);
                                      return std::move(r.y);
                                  },
                                  [&](const FlattenSpec&) {
                                      Tensor f = x;
                                      f.reshape({x.dim(0), x.size() / x.dim(0)});
                                      return f;
                                  },
                                  [&](const DenseSpec&) {
                                      return dense_forward(x, layer.params[0].value, layer.params[1].value);
                                  },
                              },
                              specs_[i]);
        layer.cached_input = std::move(x);
        x = std::move(y);
    }
    return x;
}

void Model::backward(const Tensor& dlogits) {
    Tensor grad = dlogits;
    for (std::size_t idx = specs_.size(); idx-- > 0;) {
        auto& layer = layers_[idx];
        const Tensor& x = layer.cached_input;
        if (x.size() == 0) throw InvalidInput("backward called without a training forward pass");
        grad = std::visit(overloaded{
                              [&](const Conv2DSpec&) {
                                  auto g = conv2d_backward(grad, x, layer.params[0].value);
                                  for (std::size_t k = 0; k < g.dw.size(); ++k) layer.params[0].grad[k] += g.dw[k];
                                  for (std::size_t k = 0; k < g.db.size(); ++k) layer.params[1].grad[k] += g.db[k];
                                  return std::move(g.dx);
                              },
                              [&](const LeakyReluSpec& s) { return leaky_relu_backward(grad, x, s.alpha); },
                              [&](const MaxPoolSpec&) {
                                  return maxpool2x2_backward(grad, layer.pool_argmax, x.shape());
                              },
                              [&](const FlattenSpec&) {
                                  Tensor g = grad;
                                  g.reshape(x.shape());
                                  return g;
                              },
                              [&](const DenseSpec&) {
                                  auto g = dense_backward(grad, x, layer.params[0].value);
                                  for (std::size_t k = 0; k < g.dw.size(); ++k) layer.params[0].grad[k] += g.dw[k];
                                  for (std::size_t k = 0; k < g.db.size(); ++k) layer.params[1].grad[k] += g.db[k];
                                  return std::move(g.dx);
                              },
                          },
                          specs_[idx]);
    }
}

void Model::release_cache() {
    for (auto& layer : layers_) {
        layer.cached_input = Tensor();
        layer.pool_argmax.clear();
    }
}

void Model::zero_grad() {
    for (auto* p : params()) p->grad.fill(0.0);
}

std::vector<Param*> Model::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_)
        for (auto& p : layer.params) out.push_back(&p);
    return out;
}

std::vector<const Param*> Model::params() const {
    std::vector<const Param*> out;
    for (const auto& layer : layers_)
        for (const auto& p : layer.params) out.push_back(&p);
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : params()) n += p->value.size();
    return n;
}

bool Model::operator==(const Model& other) const {
    if (input_hwc_ != other.input_hwc_ || specs_.size() != other.specs_.size()) return false;
    const auto a = params();
    const auto b = other.params();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i]->value == b[i]->value)) return false;
    }
    return true;
}

} // namespace cyclosense::nn
