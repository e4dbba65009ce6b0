#pragma once

#include <cstdint>
#include <string_view>

#include "cyclosense/matrix.hpp"
#include "cyclosense/scf.hpp"
#include "cyclosense/signal.hpp"

namespace cyclosense {

enum class FeatureKind : std::uint8_t { IQ = 0, AP = 1, FFT = 2, SCF = 3, SCF_CROP = 4 };

std::string_view to_string(FeatureKind k);
FeatureKind parse_feature_kind(std::string_view name);

struct SourceMeta {
    int label = -1;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

// Real 2-D classifier input.
struct FeatureMatrix {
    Matrix<double> values;
    FeatureKind kind = FeatureKind::IQ;
    SourceMeta meta;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }
};

enum class Normalization { None, MaxAbs, ZScore };

Normalization parse_normalization(std::string_view name);
std::string_view to_string(Normalization n);

// Where crop_center anchors the alpha window.
//   Auto:  alpha = 0 band (rows 0..rows) when the matrix is one-sided,
//          symmetric about floor(R/2) otherwise.
//   AlphaZeroBand / Symmetric force one or the other.
enum class CropAnchor { Auto, AlphaZeroBand, Symmetric };

namespace features {

// Row 0 amplitude, row 1 four-quadrant phase in (-pi, pi].
FeatureMatrix ap_features(const ComplexSignal& r);

// Row 0 Re, row 1 Im of the unnormalized forward DFT.
FeatureMatrix fft_features(const ComplexSignal& r);

// Row 0 I, row 1 Q.
FeatureMatrix iq_features(const ComplexSignal& r);

// Inverse of iq_features.
ComplexSignal signal_from_iq(const FeatureMatrix& m);

FeatureMatrix scf_features(const ScfMatrix& m);

// Pure slice of a rows x cols block; columns centered on the channel span.
FeatureMatrix crop_center(const ScfMatrix& m, std::size_t rows, std::size_t cols,
                          CropAnchor anchor = CropAnchor::Auto);

// First row index crop_center would use.
std::size_t crop_row_start(const ScfMatrix& m, std::size_t rows, CropAnchor anchor = CropAnchor::Auto);

FeatureMatrix normalize_feature(FeatureMatrix m, Normalization scheme);

} // namespace features
} // namespace cyclosense
