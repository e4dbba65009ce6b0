#pragma once

// Central finite-difference checks for the layer kernels. Each check builds a
// random scalar loss L = sum(g * layer(x)) so dL/dy = g, then compares the
// analytic backward pass against (L(v + h) - L(v - h)) / 2h for every input
// and parameter entry.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cyclosense/nn_ops.hpp"
#include "cyclosense/rng.hpp"

namespace gradcheck {

using cyclosense::Rng;
using cyclosense::nn::Tensor;

inline constexpr double kStep = 1e-3;

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = scale * (2.0 * rng.uniform() - 1.0);
    return t;
}

// Values bounded away from zero: the leaky-ReLU kink stays outside the FD step.
inline Tensor off_kink_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) {
        const double m = 0.05 + 0.95 * rng.uniform();
        v = rng.bit() ? m : -m;
    }
    return t;
}

// Distinct values spaced far apart relative to the FD step, randomly placed,
// so no pooling window has a near-tie.
inline Tensor spaced_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t(std::move(shape));
    const std::size_t n = t.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t i = 0; i < n; ++i) t[perm[i]] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
    return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

// Max relative error between `analytic` and the FD gradient of `loss` with
// respect to the entries of `v`.
inline double compare(Tensor& v, const Tensor& analytic, const std::function<double()>& loss) {
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + kStep;
        const double up = loss();
        v[i] = keep - kStep;
        const double down = loss();
        v[i] = keep;
        worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * kStep)));
    }
    return worst;
}

inline double check_conv(std::size_t n, std::size_t h, std::size_t w, std::size_t cin, std::size_t cout, Rng& rng) {
    Tensor x = random_tensor({n, h, w, cin}, rng);
    Tensor wt = random_tensor({3, 3, cin, cout}, rng, 0.5);
    Tensor b = random_tensor({cout}, rng);
    const Tensor g = random_tensor({n, h, w, cout}, rng);
    auto loss = [&] { return dot(g, cyclosense::nn::conv2d_forward(x, wt, b)); };
    const auto grads = cyclosense::nn::conv2d_backward(g, x, wt);
    return std::max({compare(x, grads.dx, loss), compare(wt, grads.dw, loss), compare(b, grads.db, loss)});
}

inline double check_dense(std::size_t batch, std::size_t in, std::size_t out, Rng& rng) {
    Tensor x = random_tensor({batch, in}, rng);
    Tensor w = random_tensor({in, out}, rng, 0.5);
    Tensor b = random_tensor({out}, rng);
    const Tensor g = random_tensor({batch, out}, rng);
    auto loss = [&] { return dot(g, cyclosense::nn::dense_forward(x, w, b)); };
    const auto grads = cyclosense::nn::dense_backward(g, x, w);
    return std::max({compare(x, grads.dx, loss), compare(w, grads.dw, loss), compare(b, grads.db, loss)});
}

inline double check_leaky(std::vector<std::size_t> shape, double alpha, Rng& rng) {
    Tensor x = off_kink_tensor(shape, rng);
    const Tensor g = random_tensor(shape, rng);
    auto loss = [&] { return dot(g, cyclosense::nn::leaky_relu(x, alpha)); };
    return compare(x, cyclosense::nn::leaky_relu_backward(g, x, alpha), loss);
}

inline double check_pool(std::vector<std::size_t> shape, Rng& rng) {
    Tensor x = spaced_tensor(shape, rng);
    const auto fwd = cyclosense::nn::maxpool2x2(x);
    const Tensor g = random_tensor(fwd.y.shape(), rng);
    auto loss = [&] { return dot(g, cyclosense::nn::maxpool2x2(x).y); };
    return compare(x, cyclosense::nn::maxpool2x2_backward(g, fwd.argmax, x.shape()), loss);
}

inline double check_softmax_ce(std::size_t k, Rng& rng) {
    Tensor z = random_tensor({k}, rng, 3.0);
    const std::size_t label = rng.below(k);
    auto loss = [&] { return cyclosense::nn::softmax_cross_entropy(z.values(), label).loss; };
    const auto res = cyclosense::nn::softmax_cross_entropy(z.values(), label);
    Tensor analytic({k});
    for (std::size_t i = 0; i < k; ++i) analytic[i] = res.dlogits[i];
    return compare(z, analytic, loss);
}

} // namespace gradcheck
