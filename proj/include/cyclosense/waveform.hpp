#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclosense/matrix.hpp"
#include "cyclosense/signal.hpp"

namespace cyclosense {

// Label order matches the class index k used throughout the experiments.
enum class WaveformClass : int { Noise = 0, Gsm = 1, Umts = 2, Lte = 3 };

inline constexpr int kNumWaveformClasses = 4;

std::string_view to_string(WaveformClass c);
// Accepts "noise"/"awgn", "gsm", "umts", "lte" (case-insensitive) or the index.
WaveformClass parse_waveform_class(std::string_view name);

struct ChannelConfig {
    std::vector<int> tap_delays_samples{0, 2, 5};
    std::vector<double> tap_power_profile_db{0.0, -3.0, -6.0};
    // +infinity disables the AWGN stage.
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    // false: deterministic taps sqrt(p_k), used for flat-gain checks.
    bool rayleigh = true;

    std::size_t num_taps() const noexcept { return tap_delays_samples.size(); }
};

void validate(const ChannelConfig& cfg);

// What apply_channel did, for audits of the realized SNR.
struct ChannelRealization {
    ComplexSignal output;
    std::vector<cdouble> taps;
    double signal_power = 0.0; // mean |faded signal|^2
    double noise_power = 0.0;  // mean |injected noise|^2, 0 when disabled
};

namespace waveform {

// Continuous-phase GMSK with modulation index 1/2. Output has unit envelope.
ComplexSignal generate_gmsk(std::span<const std::uint8_t> bits, int samples_per_symbol,
                            double bt_product);

// Gaussian frequency-pulse taps used by generate_gmsk (sum = 1, span 4 symbols).
std::vector<double> gmsk_pulse(int samples_per_symbol, double bt_product);

// Direct-sequence spreading: every data bit (0 -> -1, 1 -> +1) multiplies a
// fixed QPSK chip code (+-1 +- i)/sqrt(2) drawn from `seed`, each chip held
// for samples_per_chip samples.
ComplexSignal generate_dsss(std::span<const std::uint8_t> bits, int spreading_factor,
                            std::uint64_t seed, int samples_per_chip = 1);

std::vector<cdouble> dsss_code(int spreading_factor, std::uint64_t seed);

// CP-OFDM with random square-QAM payload. `active_subcarriers` (0 = all)
// occupies the lowest |k| bins around DC, excluding DC itself when fewer than
// all bins are active.
ComplexSignal generate_ofdm(int num_subcarriers, int cp_len, int num_symbols, int qam_order,
                            std::uint64_t seed, int active_subcarriers = 0);

// Modulates an explicit payload: one row per OFDM symbol, one column per
// subcarrier (natural DFT order). No power normalization.
ComplexSignal ofdm_modulate(const Matrix<cdouble>& payload, int cp_len);

ComplexSignal generate_noise(std::size_t length, std::uint64_t seed);

std::vector<std::uint8_t> random_bits(std::size_t count, std::uint64_t seed);

// Rayleigh multipath (independent complex Gaussian taps, unit total mean
// power) followed by AWGN scaled so the realized SNR equals cfg.snr_db.
ComplexSignal apply_channel(const ComplexSignal& x, const ChannelConfig& cfg);
ChannelRealization apply_channel_detailed(const ComplexSignal& x, const ChannelConfig& cfg);

// Defaults for the class stand-ins used by dataset generation.
struct ClassProfile {
    int gmsk_samples_per_symbol = 4;
    double gmsk_bt = 0.3;
    int dsss_spreading_factor = 16;
    int dsss_samples_per_chip = 2;
    std::uint64_t dsss_code_seed = 0x5EED;
    int ofdm_subcarriers = 64;
    int ofdm_cp_len = 16;
    int ofdm_qam_order = 16;
    int ofdm_active_subcarriers = 48;
};

// Clean, unit-power waveform of the given class with a random start phase
// in its symbol structure. Noise class returns generate_noise.
ComplexSignal synthesize(WaveformClass cls, std::size_t length, std::uint64_t seed,
                         const ClassProfile& profile = {});

// One labeled record: H1 classes go through apply_channel at snr_db, H0
// (Noise) is unit-variance AWGN. Samples are rounded to float32 precision.
struct Record {
    ComplexSignal signal;
    WaveformClass label = WaveformClass::Noise;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    double signal_power = 0.0;
    double noise_power = 0.0;
};

Record generate_record(WaveformClass cls, double snr_db, std::size_t length,
                       std::uint64_t seed, const ClassProfile& profile = {},
                       const ChannelConfig& channel = {});

} // namespace waveform
} // namespace cyclosense
