#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cyclosense/matrix.hpp"
#include "cyclosense/signal.hpp"

namespace cyclosense {

enum class DemodWindow { Hamming, Rectangular };

// FFT accumulation method settings.
//   n_prime: channelization length (first FFT size, number of frequency channels)
//   l_hop:   hop between consecutive channelization frames
// The second FFT length is P = signal_length / l_hop and must be a power of two.
struct FamConfig {
    std::size_t n_prime = 16;
    std::size_t l_hop = 1;
    DemodWindow demod_window = DemodWindow::Hamming;
    bool one_sided_alpha = true;
};

// Throws InvalidInput unless cfg is usable for a record of signal_length samples.
void validate(const FamConfig& cfg, std::size_t signal_length);

// Rows are cyclic frequencies, columns frequency channels. Axes in cycles/sample.
// Columns are ordered from -1/2 upwards; rows from alpha = 0 (one-sided) or
// from the most negative alpha (two-sided, alpha = 0 at row rows/2).
struct ScfComplex {
    Matrix<cdouble> values;
    std::vector<double> alpha_axis;
    std::vector<double> freq_axis;
};

struct ScfMatrix {
    Matrix<double> values;
    std::vector<double> alpha_axis;
    std::vector<double> freq_axis;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }
};

namespace scf {

std::vector<double> window(DemodWindow kind, std::size_t n);

// Channel frequencies, centered order: (j - n/2) / n.
std::vector<double> channel_frequencies(std::size_t n_prime);

// Row t is the windowed n_prime-point DFT of r[tL .. tL + n_prime) (zero
// padded past the end), multiplied by exp(-i 2 pi m t L / n_prime) for
// channel frequency m / n_prime. Columns use channel_frequencies order.
Matrix<cdouble> complex_demodulates(const ComplexSignal& r, const FamConfig& cfg);

ScfComplex fam_scf(const ComplexSignal& r, const FamConfig& cfg);

ScfMatrix scf_magnitude(const ScfComplex& s);

// Convenience: |fam_scf(r, cfg)|.
ScfMatrix compute_scf(const ComplexSignal& r, const FamConfig& cfg = {});

// Row whose alpha is nearest to `alpha`; throws InvalidInput outside the axis.
std::size_t nearest_alpha_row(const ScfMatrix& m, double alpha);

// Brute-force reference. Cyclic autocorrelation
//   R(tau) = (1/T) sum_t r[t + tau] conj(r[t]) exp(-i 2 pi alpha t),  |tau| <= max_lag
// (T = number of summed terms), then its DFT over tau evaluated at `freqs`
// (cycles/sample). O(N * max_lag); for validation only.
std::vector<cdouble> direct_scf_oracle(const ComplexSignal& r, double alpha, std::size_t max_lag,
                                       std::span<const double> freqs);

// Same, on the default grid of 2 * max_lag + 1 centered frequencies
// (k - max_lag) / (2 * max_lag + 1).
std::vector<cdouble> direct_scf_oracle(const ComplexSignal& r, double alpha, std::size_t max_lag);

std::vector<double> oracle_frequencies(std::size_t max_lag);

// R^alpha(tau) for tau = -max_lag..max_lag, normalized per lag by its term count.
std::vector<cdouble> cyclic_autocorrelation(const ComplexSignal& r, double alpha, std::size_t max_lag);

// Oracle with per-lag weights; lag_taper has 2 * max_lag + 1 entries.
std::vector<cdouble> direct_scf_oracle(const ComplexSignal& r, double alpha, std::span<const cdouble> lag_taper,
                                       std::span<const double> freqs);

// Lag weights g(tau) = sum_l a[l + tau] a[l] exp(i 2 pi alpha l) that one
// channelizer window applies to R^alpha(tau) when a channel is multiplied by
// its own conjugate. Tapering the oracle with them gives the quantity each
// fam_scf column estimates at its channel frequency.
std::vector<cdouble> channelizer_lag_kernel(DemodWindow kind, std::size_t n_prime, double alpha);

} // namespace scf
} // namespace cyclosense
