#include "cyclosense/nn_ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cyclosense/error.hpp"

namespace cyclosense::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct ImageDims {
    std::size_t n, h, w, c;
    bool batched;
};

ImageDims image_dims(const Tensor& x, const char* what) {
    if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2), false};
    if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), true};
    throw ShapeError(std::string(what) + ": expected HWC or NHWC tensor, got " + shape_string(x.shape()));
}

std::vector<std::size_t> image_shape(const ImageDims& d, std::size_t h, std::size_t w, std::size_t c) {
    if (d.batched) return {d.n, h, w, c};
    return {h, w, c};
}

// cols[(n, i, j), (p, l, k)] = x[n, i+p-1, j+l-1, k], zero outside.
Buffer im2col(const Tensor& x, const ImageDims& d) {
    const std::size_t kcols = 9 * d.c;
    Buffer cols(d.n * d.h * d.w * kcols, 0.0);
    const double* src = x.data();
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < d.h; ++i) {
            for (std::size_t j = 0; j < d.w; ++j) {
                double* dst = cols.data() + ((n * d.h + i) * d.w + j) * kcols;
                for (std::size_t p = 0; p < 3; ++p) {
                    const auto si = static_cast<std::ptrdiff_t>(i + p) - 1;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t l = 0; l < 3; ++l) {
                        const auto sj = static_cast<std::ptrdiff_t>(j + l) - 1;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        const double* px = src + ((n * d.h + static_cast<std::size_t>(si)) * d.w +
                                                  static_cast<std::size_t>(sj)) * d.c;
                        std::copy(px, px + d.c, dst + (p * 3 + l) * d.c);
                    }
                }
            }
        }
    }
    return cols;
}

void col2im(const Buffer& cols, const ImageDims& d, Tensor& dx) {
    const std::size_t kcols = 9 * d.c;
    double* dst = dx.data();
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < d.h; ++i) {
            for (std::size_t j = 0; j < d.w; ++j) {
                const double* src = cols.data() + ((n * d.h + i) * d.w + j) * kcols;
                for (std::size_t p = 0; p < 3; ++p) {
                    const auto si = static_cast<std::ptrdiff_t>(i + p) - 1;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    for (std::size_t l = 0; l < 3; ++l) {
                        const auto sj = static_cast<std::ptrdiff_t>(j + l) - 1;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        double* px = dst + ((n * d.h + static_cast<std::size_t>(si)) * d.w +
                                            static_cast<std::size_t>(sj)) * d.c;
                        const double* s = src + (p * 3 + l) * d.c;
                        for (std::size_t k = 0; k < d.c; ++k) px[k] += s[k];
                    }
                }
            }
        }
    }
}

void check_conv_weights(const ImageDims& d, const Tensor& w) {
    if (w.rank() != 4 || w.dim(0) != 3 || w.dim(1) != 3 || w.dim(2) != d.c)
        throw ShapeError("conv2d: weight shape " + shape_string(w.shape()) +
                         " does not match input channels " + std::to_string(d.c));
}

} // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const auto d = image_dims(x, "conv2d");
    check_conv_weights(d, w);
    const std::size_t cout = w.dim(3);
    if (b.rank() != 1 || b.dim(0) != cout) throw ShapeError("conv2d: bias shape mismatch");

    const auto cols = im2col(x, d);
    const std::size_t pixels = d.n * d.h * d.w;
    Tensor y(image_shape(d, d.h, d.w, cout));
    MutMap ym(y.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(cout));
    ym.noalias() = ConstMap(cols.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(9 * d.c)) *
                   ConstMap(w.data(), static_cast<Eigen::Index>(9 * d.c), static_cast<Eigen::Index>(cout));
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(cout));
    return y;
}

ConvGrads conv2d_backward(const Tensor& dy, const Tensor& x, const Tensor& w) {
    const auto d = image_dims(x, "conv2d_backward");
    check_conv_weights(d, w);
    const std::size_t cout = w.dim(3);
    if (dy.shape() != image_shape(d, d.h, d.w, cout))
        throw ShapeError("conv2d_backward: upstream gradient shape " + shape_string(dy.shape()));

    const auto pixels = static_cast<Eigen::Index>(d.n * d.h * d.w);
    const auto k = static_cast<Eigen::Index>(9 * d.c);
    const auto co = static_cast<Eigen::Index>(cout);
    const auto cols = im2col(x, d);
    ConstMap colm(cols.data(), pixels, k);
    ConstMap dym(dy.data(), pixels, co);
    ConstMap wm(w.data(), k, co);

    ConvGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor({cout})};
    MutMap(g.dw.data(), k, co).noalias() = colm.transpose() * dym;
    Eigen::Map<Eigen::RowVectorXd>(g.db.data(), co) = dym.colwise().sum();
    Buffer dcols(cols.size());
    MutMap(dcols.data(), pixels, k).noalias() = dym * wm.transpose();
    col2im(dcols, d, g.dx);
    return g;
}

Tensor leaky_relu(const Tensor& x, double alpha) {
    Tensor y = x;
    for (double& v : y.values()) v = v >= 0.0 ? v : alpha * v;
    return y;
}

Tensor leaky_relu_backward(const Tensor& dy, const Tensor& x, double alpha) {
    if (dy.shape() != x.shape()) throw ShapeError("leaky_relu_backward: shape mismatch");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (x[i] < 0.0) dx[i] *= alpha;
    }
    return dx;
}

PoolResult maxpool2x2(const Tensor& x) {
    const auto d = image_dims(x, "maxpool2x2");
    const std::size_t oh = (d.h + 1) / 2;
    const std::size_t ow = (d.w + 1) / 2;
    PoolResult out{Tensor(image_shape(d, oh, ow, d.c)), {}};
    out.argmax.resize(out.y.size());
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t c = 0; c < d.c; ++c) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    bool first = true;
                    for (std::size_t a = 2 * i; a < std::min(2 * i + 2, d.h); ++a) {
                        for (std::size_t bcol = 2 * j; bcol < std::min(2 * j + 2, d.w); ++bcol) {
                            const std::size_t idx = ((n * d.h + a) * d.w + bcol) * d.c + c;
                            if (first || x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                                first = false;
                            }
                        }
                    }
                    const std::size_t o = ((n * oh + i) * ow + j) * d.c + c;
                    out.y[o] = best;
                    out.argmax[o] = best_idx;
                }
            }
        }
    }
    return out;
}

Tensor maxpool2x2_backward(const Tensor& dy, std::span<const std::size_t> argmax,
                           const std::vector<std::size_t>& x_shape) {
    if (argmax.size() != dy.size()) throw ShapeError("maxpool2x2_backward: argmax size mismatch");
    Tensor dx(x_shape);
    for (std::size_t o = 0; o < dy.size(); ++o) {
        if (argmax[o] >= dx.size()) throw ShapeError("maxpool2x2_backward: argmax out of range");
        dx[argmax[o]] += dy[o];
    }
    return dx;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2 || b.rank() != 1 || b.dim(0) != w.dim(1))
        throw ShapeError("dense: parameter shapes " + shape_string(w.shape()) + ", " + shape_string(b.shape()));
    const bool batched = x.rank() == 2;
    if (!batched && x.rank() != 1) throw ShapeError("dense: input must be [in] or [B, in]");
    const std::size_t n = batched ? x.dim(0) : 1;
    const std::size_t in = batched ? x.dim(1) : x.dim(0);
    if (in != w.dim(0)) throw ShapeError("dense: input width " + std::to_string(in) + " != " + std::to_string(w.dim(0)));
    const std::size_t out_dim = w.dim(1);
    Tensor y(batched ? std::vector<std::size_t>{n, out_dim} : std::vector<std::size_t>{out_dim});
    MutMap ym(y.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
    ym.noalias() = ConstMap(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in)) *
                   ConstMap(w.data(), static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out_dim));
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), static_cast<Eigen::Index>(out_dim));
    return y;
}

DenseGrads dense_backward(const Tensor& dy, const Tensor& x, const Tensor& w) {
    const bool batched = x.rank() == 2;
    const std::size_t n = batched ? x.dim(0) : 1;
    const std::size_t in = batched ? x.dim(1) : x.dim(0);
    const std::size_t out_dim = w.dim(1);
    if (in != w.dim(0) || dy.size() != n * out_dim) throw ShapeError("dense_backward: shape mismatch");
    const auto ni = static_cast<Eigen::Index>(n);
    const auto ii = static_cast<Eigen::Index>(in);
    const auto oi = static_cast<Eigen::Index>(out_dim);
    ConstMap xm(x.data(), ni, ii);
    ConstMap dym(dy.data(), ni, oi);
    DenseGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor({out_dim})};
    MutMap(g.dw.data(), ii, oi).noalias() = xm.transpose() * dym;
    Eigen::Map<Eigen::RowVectorXd>(g.db.data(), oi) = dym.colwise().sum();
    MutMap(g.dx.data(), ni, ii).noalias() = dym * ConstMap(w.data(), ii, oi).transpose();
    return g;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double peak = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

LossResult softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) throw InvalidInput("label out of range for logits");
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - peak);
    const double log_z = peak + std::log(sum);
    LossResult r;
    r.loss = log_z - logits[label];
    r.dlogits.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) r.dlogits[k] = std::exp(logits[k] - log_z);
    r.dlogits[label] -= 1.0;
    return r;
}

} // namespace cyclosense::nn
