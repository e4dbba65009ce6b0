#include "cyclosense/waveform.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "cyclosense/error.hpp"
#include "cyclosense/fft.hpp"
#include "cyclosense/rng.hpp"

namespace cyclosense {

std::string_view to_string(WaveformClass c) {
    switch (c) {
    case WaveformClass::Noise: return "noise";
    case WaveformClass::Gsm: return "gsm";
    case WaveformClass::Umts: return "umts";
    case WaveformClass::Lte: return "lte";
    }
    return "unknown";
}

WaveformClass parse_waveform_class(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "noise" || lower == "awgn" || lower == "0") return WaveformClass::Noise;
    if (lower == "gsm" || lower == "1") return WaveformClass::Gsm;
    if (lower == "umts" || lower == "2") return WaveformClass::Umts;
    if (lower == "lte" || lower == "3") return WaveformClass::Lte;
    throw InvalidInput("unknown waveform class: " + std::string(name));
}

void validate(const ChannelConfig& cfg) {
    if (cfg.tap_delays_samples.empty()) throw InvalidInput("channel needs at least one tap");
    if (cfg.tap_delays_samples.size() != cfg.tap_power_profile_db.size())
        throw InvalidInput("tap delay and power profiles differ in length");
    if (cfg.tap_delays_samples.front() != 0) throw InvalidInput("first tap delay must be 0");
    if (!std::is_sorted(cfg.tap_delays_samples.begin(), cfg.tap_delays_samples.end()))
        throw InvalidInput("tap delays must be nondecreasing");
    for (double p : cfg.tap_power_profile_db) {
        if (!std::isfinite(p)) throw InvalidInput("tap powers must be finite");
    }
    if (std::isnan(cfg.snr_db) || cfg.snr_db == -std::numeric_limits<double>::infinity())
        throw InvalidInput("snr_db must be a number or +inf");
}

namespace waveform {

std::vector<double> gmsk_pulse(int samples_per_symbol, double bt_product) {
    const double sigma = samples_per_symbol * std::sqrt(std::log(2.0)) /
                         (2.0 * std::numbers::pi * bt_product);
    const int half = 2 * samples_per_symbol;
    std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
    double sum = 0.0;
    for (int j = -half; j <= half; ++j) {
        const double v = std::exp(-0.5 * (j * j) / (sigma * sigma));
        taps[static_cast<std::size_t>(j + half)] = v;
        sum += v;
    }
    for (double& v : taps) v /= sum;
    return taps;
}

ComplexSignal generate_gmsk(std::span<const std::uint8_t> bits, int samples_per_symbol,
                            double bt_product) {
    if (bits.empty()) throw InvalidInput("GMSK needs at least one bit");
    if (samples_per_symbol < 2) throw InvalidInput("GMSK needs samples_per_symbol >= 2");
    if (!(bt_product > 0.0 && bt_product <= 1.0)) throw InvalidInput("BT must be in (0, 1]");

    const auto sps = static_cast<std::size_t>(samples_per_symbol);
    const std::size_t n = bits.size() * sps;
    std::vector<double> nrz(n);
    for (std::size_t i = 0; i < n; ++i) nrz[i] = bits[i / sps] ? 1.0 : -1.0;

    const auto pulse = gmsk_pulse(samples_per_symbol, bt_product);
    const auto half = static_cast<std::ptrdiff_t>(pulse.size() / 2);

    ComplexSignal out;
    out.samples.resize(n);
    const double step = std::numbers::pi / 2.0 / samples_per_symbol;
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double freq = 0.0;
        for (std::ptrdiff_t j = -half; j <= half; ++j) {
            const auto src = static_cast<std::ptrdiff_t>(i) - j;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
            freq += pulse[static_cast<std::size_t>(j + half)] * nrz[static_cast<std::size_t>(src)];
        }
        phase += step * freq;
        out.samples[i] = std::polar(1.0, phase);
    }
    return out;
}

std::vector<cdouble> dsss_code(int spreading_factor, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<cdouble> code(static_cast<std::size_t>(spreading_factor));
    const double s = 1.0 / std::numbers::sqrt2;
    for (auto& c : code) {
        const double re = rng.bit() ? 1.0 : -1.0;
        const double im = rng.bit() ? 1.0 : -1.0;
        c = {re * s, im * s};
    }
    return code;
}

ComplexSignal generate_dsss(std::span<const std::uint8_t> bits, int spreading_factor,
                            std::uint64_t seed, int samples_per_chip) {
    if (spreading_factor < 4) throw InvalidInput("spreading factor must be >= 4");
    if (samples_per_chip < 1) throw InvalidInput("samples_per_chip must be >= 1");
    if (bits.empty()) throw InvalidInput("DSSS needs at least one bit");
    const auto code = dsss_code(spreading_factor, seed);
    const auto spc = static_cast<std::size_t>(samples_per_chip);
    ComplexSignal out;
    out.samples.reserve(bits.size() * code.size() * spc);
    for (auto b : bits) {
        const double d = b ? 1.0 : -1.0;
        for (const auto& c : code) {
            for (std::size_t k = 0; k < spc; ++k) out.samples.push_back(d * c);
        }
    }
    return out;
}

ComplexSignal ofdm_modulate(const Matrix<cdouble>& payload, int cp_len) {
    const std::size_t n = payload.cols();
    if (!fft::is_power_of_two(n)) throw InvalidInput("subcarrier count must be a power of two");
    if (cp_len < 0 || static_cast<std::size_t>(cp_len) >= n)
        throw InvalidInput("cyclic prefix must satisfy 0 <= cp < subcarriers");
    const auto cp = static_cast<std::size_t>(cp_len);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));

    ComplexSignal out;
    out.samples.reserve(payload.rows() * (n + cp));
    std::vector<cdouble> sym(n);
    for (std::size_t r = 0; r < payload.rows(); ++r) {
        std::copy(payload.row(r).begin(), payload.row(r).end(), sym.begin());
        fft::transform(sym, fft::Direction::Inverse);
        for (auto& v : sym) v *= scale;
        out.samples.insert(out.samples.end(), sym.end() - static_cast<std::ptrdiff_t>(cp), sym.end());
        out.samples.insert(out.samples.end(), sym.begin(), sym.end());
    }
    return out;
}

ComplexSignal generate_ofdm(int num_subcarriers, int cp_len, int num_symbols, int qam_order,
                            std::uint64_t seed, int active_subcarriers) {
    if (num_subcarriers <= 0 || !fft::is_power_of_two(static_cast<std::size_t>(num_subcarriers)))
        throw InvalidInput("subcarrier count must be a power of two");
    if (num_symbols <= 0) throw InvalidInput("OFDM needs at least one symbol");
    if (qam_order != 4 && qam_order != 16 && qam_order != 64)
        throw InvalidInput("QAM order must be 4, 16 or 64");
    if (active_subcarriers < 0 || active_subcarriers > num_subcarriers)
        throw InvalidInput("active subcarrier count out of range");

    const auto n = static_cast<std::size_t>(num_subcarriers);
    std::vector<std::size_t> bins;
    if (active_subcarriers == 0 || active_subcarriers == num_subcarriers) {
        for (std::size_t k = 0; k < n; ++k) bins.push_back(k);
    } else {
        const auto half = static_cast<std::size_t>(active_subcarriers) / 2;
        for (std::size_t k = 1; k <= half; ++k) {
            bins.push_back(k);
            bins.push_back(n - k);
        }
        if (active_subcarriers % 2 == 1) bins.push_back(half + 1);
    }

    const int levels = static_cast<int>(std::lround(std::sqrt(qam_order)));
    // Mean energy of {+-1, +-3, ...} per axis is (levels^2 - 1) / 3.
    const double norm = 1.0 / std::sqrt(2.0 * (levels * levels - 1) / 3.0);
    Rng rng(seed);
    Matrix<cdouble> payload(static_cast<std::size_t>(num_symbols), n);
    for (std::size_t r = 0; r < payload.rows(); ++r) {
        for (auto k : bins) {
            const double re = 2.0 * static_cast<double>(rng.below(levels)) - (levels - 1);
            const double im = 2.0 * static_cast<double>(rng.below(levels)) - (levels - 1);
            payload(r, k) = {re * norm, im * norm};
        }
    }
    return normalize_power(ofdm_modulate(payload, cp_len));
}

ComplexSignal generate_noise(std::size_t length, std::uint64_t seed) {
    if (length == 0) throw InvalidInput("noise length must be >= 1");
    Rng rng(seed);
    ComplexSignal out;
    out.samples.resize(length);
    for (auto& v : out.samples) v = rng.complex_normal(1.0);
    return out;
}

std::vector<std::uint8_t> random_bits(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> bits(count);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bit());
    return bits;
}

ChannelRealization apply_channel_detailed(const ComplexSignal& x, const ChannelConfig& cfg) {
    validate(x);
    validate(cfg);

    std::vector<double> powers;
    double total = 0.0;
    for (double db : cfg.tap_power_profile_db) {
        powers.push_back(std::pow(10.0, db / 10.0));
        total += powers.back();
    }
    for (double& p : powers) p /= total;

    Rng rng(cfg.seed);
    ChannelRealization out;
    for (double p : powers) out.taps.push_back(cfg.rayleigh ? rng.complex_normal(p) : cdouble(std::sqrt(p)));

    const std::size_t n = x.size();
    out.output.sample_rate_hz = x.sample_rate_hz;
    out.output.samples.assign(n, cdouble{});
    for (std::size_t k = 0; k < out.taps.size(); ++k) {
        const auto d = static_cast<std::size_t>(cfg.tap_delays_samples[k]);
        for (std::size_t i = d; i < n; ++i) out.output.samples[i] += out.taps[k] * x.samples[i - d];
    }
    out.signal_power = mean_power(out.output);

    if (std::isfinite(cfg.snr_db) && out.signal_power > 0.0) {
        std::vector<cdouble> noise(n);
        double realized = 0.0;
        for (auto& w : noise) {
            w = rng.complex_normal(1.0);
            realized += std::norm(w);
        }
        realized /= static_cast<double>(n);
        const double target = out.signal_power / std::pow(10.0, cfg.snr_db / 10.0);
        const double g = std::sqrt(target / realized);
        double injected = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const cdouble w = g * noise[i];
            injected += std::norm(w);
            out.output.samples[i] += w;
        }
        out.noise_power = injected / static_cast<double>(n);
    }
    return out;
}

ComplexSignal apply_channel(const ComplexSignal& x, const ChannelConfig& cfg) {
    return apply_channel_detailed(x, cfg).output;
}

ComplexSignal synthesize(WaveformClass cls, std::size_t length, std::uint64_t seed,
                         const ClassProfile& profile) {
    if (length == 0) throw InvalidInput("record length must be >= 1");
    Rng rng(mix_seed(seed, 0));
    const std::uint64_t data_seed = mix_seed(seed, 1);

    ComplexSignal raw;
    std::size_t offset = 0;
    switch (cls) {
    case WaveformClass::Noise:
        return generate_noise(length, data_seed);
    case WaveformClass::Gsm: {
        const auto sps = static_cast<std::size_t>(profile.gmsk_samples_per_symbol);
        // Skip the first 8 symbols so the filter start-up transient is gone.
        const std::size_t lead = 8 * sps;
        const auto bits = random_bits(length / sps + 18, data_seed);
        raw = generate_gmsk(bits, profile.gmsk_samples_per_symbol, profile.gmsk_bt);
        offset = lead + rng.below(sps);
        // Random carrier phase.
        const cdouble rot = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
        for (auto& v : raw.samples) v *= rot;
        break;
    }
    case WaveformClass::Umts: {
        const auto sym = static_cast<std::size_t>(profile.dsss_spreading_factor) *
                         static_cast<std::size_t>(profile.dsss_samples_per_chip);
        const auto bits = random_bits(length / sym + 2, data_seed);
        raw = generate_dsss(bits, profile.dsss_spreading_factor, profile.dsss_code_seed,
                            profile.dsss_samples_per_chip);
        offset = rng.below(sym);
        break;
    }
    case WaveformClass::Lte: {
        const auto sym = static_cast<std::size_t>(profile.ofdm_subcarriers + profile.ofdm_cp_len);
        raw = generate_ofdm(profile.ofdm_subcarriers, profile.ofdm_cp_len,
                            static_cast<int>(length / sym + 2), profile.ofdm_qam_order, data_seed,
                            profile.ofdm_active_subcarriers);
        offset = rng.below(sym);
        break;
    }
    }
    ComplexSignal out;
    out.samples.assign(raw.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                       raw.samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
    return normalize_power(std::move(out));
}

Record generate_record(WaveformClass cls, double snr_db, std::size_t length, std::uint64_t seed,
                       const ClassProfile& profile, const ChannelConfig& channel) {
    Record rec;
    rec.label = cls;
    rec.snr_db = snr_db;
    rec.seed = seed;
    if (cls == WaveformClass::Noise) {
        rec.signal = generate_noise(length, mix_seed(seed, 2));
        rec.noise_power = mean_power(rec.signal);
    } else {
        ChannelConfig cfg = channel;
        cfg.snr_db = snr_db;
        cfg.seed = mix_seed(seed, 2);
        auto real = apply_channel_detailed(synthesize(cls, length, seed, profile), cfg);
        rec.signal = std::move(real.output);
        rec.signal_power = real.signal_power;
        rec.noise_power = real.noise_power;
    }
    rec.signal = quantize_to_float32(std::move(rec.signal));
    return rec;
}

} // namespace waveform
} // namespace cyclosense
