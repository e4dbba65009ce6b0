#include "cyclosense/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "cyclosense/error.hpp"
#include "cyclosense/fft.hpp"

namespace cyclosense {
namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::string_view to_string(FeatureKind k) {
    switch (k) {
    case FeatureKind::IQ: return "iq";
    case FeatureKind::AP: return "ap";
    case FeatureKind::FFT: return "fft";
    case FeatureKind::SCF: return "scf";
    case FeatureKind::SCF_CROP: return "scf_crop";
    }
    return "unknown";
}

FeatureKind parse_feature_kind(std::string_view name) {
    const auto s = lowercase(name);
    if (s == "iq" || s == "i/q") return FeatureKind::IQ;
    if (s == "ap") return FeatureKind::AP;
    if (s == "fft") return FeatureKind::FFT;
    if (s == "scf") return FeatureKind::SCF;
    if (s == "scf_crop" || s == "scf-crop") return FeatureKind::SCF_CROP;
    throw InvalidInput("unknown feature kind: " + std::string(name));
}

Normalization parse_normalization(std::string_view name) {
    const auto s = lowercase(name);
    if (s == "none") return Normalization::None;
    if (s == "maxabs") return Normalization::MaxAbs;
    if (s == "zscore") return Normalization::ZScore;
    throw InvalidInput("unknown normalization: " + std::string(name));
}

std::string_view to_string(Normalization n) {
    switch (n) {
    case Normalization::None: return "none";
    case Normalization::MaxAbs: return "maxabs";
    case Normalization::ZScore: return "zscore";
    }
    return "unknown";
}

namespace features {

FeatureMatrix ap_features(const ComplexSignal& r) {
    validate(r);
    FeatureMatrix out{Matrix<double>(2, r.size()), FeatureKind::AP, {}};
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto& x = r.samples[i];
        out.values(0, i) = std::hypot(x.real(), x.imag());
        double phase = std::atan2(x.imag(), x.real());
        // atan2 returns -pi for (negative, -0.0); fold onto +pi.
        if (phase <= -std::numbers::pi) phase = std::numbers::pi;
        out.values(1, i) = phase;
    }
    return out;
}

FeatureMatrix fft_features(const ComplexSignal& r) {
    validate(r);
    std::vector<cdouble> spec(r.samples);
    fft::transform(spec);
    FeatureMatrix out{Matrix<double>(2, r.size()), FeatureKind::FFT, {}};
    for (std::size_t i = 0; i < spec.size(); ++i) {
        out.values(0, i) = spec[i].real();
        out.values(1, i) = spec[i].imag();
    }
    return out;
}

FeatureMatrix iq_features(const ComplexSignal& r) {
    validate(r);
    FeatureMatrix out{Matrix<double>(2, r.size()), FeatureKind::IQ, {}};
    for (std::size_t i = 0; i < r.size(); ++i) {
        out.values(0, i) = r.samples[i].real();
        out.values(1, i) = r.samples[i].imag();
    }
    return out;
}

ComplexSignal signal_from_iq(const FeatureMatrix& m) {
    if (m.rows() != 2) throw InvalidInput("I/Q feature must have two rows");
    ComplexSignal s;
    s.samples.resize(m.cols());
    for (std::size_t i = 0; i < m.cols(); ++i) s.samples[i] = {m.values(0, i), m.values(1, i)};
    return s;
}

FeatureMatrix scf_features(const ScfMatrix& m) { return {m.values, FeatureKind::SCF, {}}; }

std::size_t crop_row_start(const ScfMatrix& m, std::size_t rows, CropAnchor anchor) {
    const std::size_t total = m.rows();
    if (rows == 0 || rows > total) throw InvalidInput("crop rows out of range");
    if (rows == total) return 0;
    bool zero_band = anchor == CropAnchor::AlphaZeroBand;
    if (anchor == CropAnchor::Auto) zero_band = !m.alpha_axis.empty() && m.alpha_axis.front() == 0.0;
    if (zero_band) return 0;
    return total / 2 - rows / 2;
}

FeatureMatrix crop_center(const ScfMatrix& m, std::size_t rows, std::size_t cols, CropAnchor anchor) {
    if (rows == 0 || cols == 0 || rows > m.rows() || cols > m.cols())
        throw InvalidInput("crop of " + std::to_string(rows) + "x" + std::to_string(cols) +
                           " does not fit a " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + " matrix");
    if ((rows % 2 != 0 && rows != m.rows()) || (cols % 2 != 0 && cols != m.cols()))
        throw InvalidInput("crop dimensions must be even or span the full axis");
    const std::size_t r0 = crop_row_start(m, rows, anchor);
    const std::size_t c0 = (m.cols() - cols) / 2;
    FeatureMatrix out{Matrix<double>(rows, cols), FeatureKind::SCF_CROP, {}};
    if (rows == m.rows() && cols == m.cols()) out.kind = FeatureKind::SCF;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.values(r, c) = m.values(r0 + r, c0 + c);
    return out;
}

FeatureMatrix normalize_feature(FeatureMatrix m, Normalization scheme) {
    auto& d = m.values.data();
    if (d.empty()) return m;
    switch (scheme) {
    case Normalization::None: break;
    case Normalization::MaxAbs: {
        double peak = 0.0;
        for (double v : d) peak = std::max(peak, std::abs(v));
        if (peak > 0.0) {
            for (double& v : d) v /= peak;
        }
        break;
    }
    case Normalization::ZScore: {
        const double n = static_cast<double>(d.size());
        double mean = 0.0;
        for (double v : d) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : d) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / n);
        for (double& v : d) v = sd > 0.0 ? (v - mean) / sd : 0.0;
        break;
    }
    }
    return m;
}

} // namespace features
} // namespace cyclosense
