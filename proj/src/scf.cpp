#include "cyclosense/scf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cyclosense/error.hpp"
#include "cyclosense/fft.hpp"

namespace cyclosense {

void validate(const FamConfig& cfg, std::size_t signal_length) {
    if (cfg.n_prime == 0) throw InvalidInput("n_prime must be positive");
    if (cfg.l_hop == 0) throw InvalidInput("l_hop must be positive");
    if (cfg.n_prime > signal_length) throw InvalidInput("n_prime exceeds signal length");
    if (signal_length % cfg.l_hop != 0) throw InvalidInput("signal length must be a multiple of l_hop");
    if (!fft::is_power_of_two(signal_length / cfg.l_hop))
        throw InvalidInput("signal_length / l_hop must be a power of two");
}

namespace scf {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::ptrdiff_t signed_bin(std::size_t m, std::size_t n) {
    return static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(n / 2);
}

} // namespace

std::vector<double> window(DemodWindow kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (kind == DemodWindow::Hamming && n > 1) {
        for (std::size_t k = 0; k < n; ++k)
            w[k] = 0.54 - 0.46 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n - 1));
    }
    return w;
}

std::vector<double> channel_frequencies(std::size_t n_prime) {
    std::vector<double> f(n_prime);
    for (std::size_t j = 0; j < n_prime; ++j)
        f[j] = static_cast<double>(signed_bin(j, n_prime)) / static_cast<double>(n_prime);
    return f;
}

Matrix<cdouble> complex_demodulates(const ComplexSignal& r, const FamConfig& cfg) {
    validate(r);
    validate(cfg, r.size());
    const std::size_t np = cfg.n_prime;
    const std::size_t hops = r.size() / cfg.l_hop;
    const auto a = window(cfg.demod_window, np);

    // Frames in natural order, transformed in one batched call.
    std::vector<cdouble> frames(hops * np);
    for (std::size_t t = 0; t < hops; ++t) {
        const std::size_t start = t * cfg.l_hop;
        const std::size_t avail = std::min(np, r.size() - start);
        for (std::size_t k = 0; k < avail; ++k) frames[t * np + k] = a[k] * r.samples[start + k];
    }
    fft::transform_many(frames, np, hops, 1, np);

    // Phase correction exp(-i 2 pi m t L / N'), depends only on (m * t * L) mod N'.
    std::vector<cdouble> twiddle(np);
    for (std::size_t k = 0; k < np; ++k)
        twiddle[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) / static_cast<double>(np));

    Matrix<cdouble> out(hops, np);
    for (std::size_t t = 0; t < hops; ++t) {
        const std::size_t shift = (t * cfg.l_hop) % np;
        for (std::size_t j = 0; j < np; ++j) {
            const std::ptrdiff_t m = signed_bin(j, np);
            const auto natural = static_cast<std::size_t>((m + static_cast<std::ptrdiff_t>(np)) %
                                                          static_cast<std::ptrdiff_t>(np));
            out(t, j) = frames[t * np + natural] * twiddle[(natural * shift) % np];
        }
    }
    return out;
}

ScfComplex fam_scf(const ComplexSignal& r, const FamConfig& cfg) {
    const auto demod = complex_demodulates(r, cfg);
    const std::size_t p = demod.rows();
    const std::size_t np = demod.cols();

    // Auto-conjugate products per channel, then P-point FFT down each column.
    std::vector<cdouble> prod(p * np);
    for (std::size_t t = 0; t < p; ++t) {
        for (std::size_t j = 0; j < np; ++j) prod[t * np + j] = std::norm(demod(t, j));
    }
    fft::transform_many(prod, p, np, np, 1);

    const double inv_hops = 1.0 / static_cast<double>(p);
    const double alpha_step = 1.0 / static_cast<double>(p * cfg.l_hop);
    ScfComplex out;
    out.freq_axis = channel_frequencies(np);
    if (cfg.one_sided_alpha) {
        const std::size_t rows = p / 2 + 1;
        out.values = Matrix<cdouble>(rows, np);
        out.alpha_axis.resize(rows);
        for (std::size_t q = 0; q < rows; ++q) {
            out.alpha_axis[q] = static_cast<double>(q) * alpha_step;
            for (std::size_t j = 0; j < np; ++j) out.values(q, j) = prod[q * np + j] * inv_hops;
        }
    } else {
        out.values = Matrix<cdouble>(p, np);
        out.alpha_axis.resize(p);
        for (std::size_t row = 0; row < p; ++row) {
            const std::ptrdiff_t q = signed_bin(row, p);
            const auto src = static_cast<std::size_t>((q + static_cast<std::ptrdiff_t>(p)) %
                                                      static_cast<std::ptrdiff_t>(p));
            out.alpha_axis[row] = static_cast<double>(q) * alpha_step;
            for (std::size_t j = 0; j < np; ++j) out.values(row, j) = prod[src * np + j] * inv_hops;
        }
    }
    return out;
}

ScfMatrix scf_magnitude(const ScfComplex& s) {
    ScfMatrix out;
    out.values = Matrix<double>(s.values.rows(), s.values.cols());
    for (std::size_t i = 0; i < s.values.size(); ++i) out.values.data()[i] = std::abs(s.values.data()[i]);
    out.alpha_axis = s.alpha_axis;
    out.freq_axis = s.freq_axis;
    return out;
}

ScfMatrix compute_scf(const ComplexSignal& r, const FamConfig& cfg) {
    return scf_magnitude(fam_scf(r, cfg));
}

std::size_t nearest_alpha_row(const ScfMatrix& m, double alpha) {
    const auto& ax = m.alpha_axis;
    if (ax.empty()) throw InvalidInput("SCF matrix has no alpha axis");
    const double half_step = ax.size() > 1 ? 0.5 * (ax[1] - ax[0]) : 0.0;
    if (!std::isfinite(alpha) || alpha < ax.front() - half_step || alpha > ax.back() + half_step)
        throw InvalidInput("cyclic frequency outside the alpha axis");
    const auto it = std::lower_bound(ax.begin(), ax.end(), alpha);
    if (it == ax.begin()) return 0;
    if (it == ax.end()) return ax.size() - 1;
    const auto hi = static_cast<std::size_t>(it - ax.begin());
    return (alpha - ax[hi - 1] <= ax[hi] - alpha) ? hi - 1 : hi;
}

std::vector<double> oracle_frequencies(std::size_t max_lag) {
    const std::size_t k = 2 * max_lag + 1;
    std::vector<double> f(k);
    for (std::size_t i = 0; i < k; ++i)
        f[i] = (static_cast<double>(i) - static_cast<double>(max_lag)) / static_cast<double>(k);
    return f;
}

std::vector<cdouble> cyclic_autocorrelation(const ComplexSignal& r, double alpha, std::size_t max_lag) {
    validate(r);
    const std::size_t n = r.size();
    if (max_lag == 0 || 2 * max_lag >= n) throw InvalidInput("max_lag must satisfy 0 < max_lag < N/2");

    std::vector<cdouble> rot(n);
    for (std::size_t t = 0; t < n; ++t) {
        // Reduce the phase argument before scaling to keep it accurate for long records.
        const double cyc = std::fmod(alpha * static_cast<double>(t), 1.0);
        rot[t] = std::conj(r.samples[t]) * std::polar(1.0, -kTwoPi * cyc);
    }

    const auto lags = 2 * max_lag + 1;
    std::vector<cdouble> caf(lags);
    for (std::size_t li = 0; li < lags; ++li) {
        const auto tau = static_cast<std::ptrdiff_t>(li) - static_cast<std::ptrdiff_t>(max_lag);
        const std::size_t t0 = tau < 0 ? static_cast<std::size_t>(-tau) : 0;
        const std::size_t t1 = tau > 0 ? n - static_cast<std::size_t>(tau) : n;
        cdouble acc{};
        for (std::size_t t = t0; t < t1; ++t)
            acc += r.samples[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(t) + tau)] * rot[t];
        caf[li] = acc / static_cast<double>(t1 - t0);
    }
    return caf;
}

std::vector<cdouble> direct_scf_oracle(const ComplexSignal& r, double alpha, std::span<const cdouble> lag_taper,
                                       std::span<const double> freqs) {
    if (lag_taper.size() % 2 == 0) throw InvalidInput("lag taper needs odd length 2 * max_lag + 1");
    const std::size_t max_lag = lag_taper.size() / 2;
    const auto caf = cyclic_autocorrelation(r, alpha, max_lag);
    std::vector<cdouble> out(freqs.size());
    for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
        cdouble acc{};
        for (std::size_t li = 0; li < caf.size(); ++li) {
            const auto tau = static_cast<double>(li) - static_cast<double>(max_lag);
            acc += lag_taper[li] * caf[li] * std::polar(1.0, -kTwoPi * freqs[fi] * tau);
        }
        out[fi] = acc;
    }
    return out;
}

std::vector<cdouble> direct_scf_oracle(const ComplexSignal& r, double alpha, std::size_t max_lag,
                                       std::span<const double> freqs) {
    const std::vector<cdouble> flat(2 * max_lag + 1, cdouble{1.0, 0.0});
    return direct_scf_oracle(r, alpha, flat, freqs);
}

std::vector<cdouble> channelizer_lag_kernel(DemodWindow kind, std::size_t n_prime, double alpha) {
    if (n_prime < 2) throw InvalidInput("n_prime must be at least 2");
    const auto a = window(kind, n_prime);
    const std::size_t max_lag = n_prime - 1;
    std::vector<cdouble> g(2 * max_lag + 1);
    for (std::size_t li = 0; li < g.size(); ++li) {
        const auto tau = static_cast<std::ptrdiff_t>(li) - static_cast<std::ptrdiff_t>(max_lag);
        cdouble acc{};
        for (std::size_t l = 0; l < n_prime; ++l) {
            const auto k = static_cast<std::ptrdiff_t>(l) + tau;
            if (k < 0 || k >= static_cast<std::ptrdiff_t>(n_prime)) continue;
            acc += a[static_cast<std::size_t>(k)] * a[l] * std::polar(1.0, kTwoPi * std::fmod(alpha * static_cast<double>(l), 1.0));
        }
        g[li] = acc;
    }
    return g;
}

std::vector<cdouble> direct_scf_oracle(const ComplexSignal& r, double alpha, std::size_t max_lag) {
    const auto f = oracle_frequencies(max_lag);
    return direct_scf_oracle(r, alpha, max_lag, f);
}

} // namespace scf
} // namespace cyclosense
