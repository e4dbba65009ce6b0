#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"

#include "cyclosense/error.hpp"
#include "cyclosense/fft.hpp"
#include "cyclosense/rng.hpp"
#include "cyclosense/scf.hpp"
#include "cyclosense/waveform.hpp"

using namespace cyclosense;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ComplexSignal random_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    ComplexSignal s;
    for (std::size_t i = 0; i < n; ++i) s.samples.push_back(rng.complex_normal());
    return s;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST_CASE("fft: matches the direct DFT") {
    auto s = random_signal(24, 3).samples;
    auto x = s;
    fft::transform(x);
    for (std::size_t k = 0; k < s.size(); ++k) {
        cdouble ref{};
        for (std::size_t n = 0; n < s.size(); ++n)
            ref += s[n] * std::polar(1.0, -kTwoPi * static_cast<double>(k * n) / static_cast<double>(s.size()));
        CHECK(std::abs(x[k] - ref) < 1e-9 * std::max(1.0, std::abs(ref)));
    }
    fft::transform(x, fft::Direction::Inverse);
    for (std::size_t n = 0; n < s.size(); ++n) CHECK(std::abs(x[n] / 24.0 - s[n]) < 1e-12);
    CHECK(fft::is_power_of_two(16384));
    CHECK_FALSE(fft::is_power_of_two(12));
    CHECK_FALSE(fft::is_power_of_two(0));
}

TEST_CASE("demodulates: zeros in, zeros out") {
    ComplexSignal z;
    z.samples.assign(64, {});
    const auto d = scf::complex_demodulates(z, {});
    CHECK(d.rows() == 64);
    CHECK(d.cols() == 16);
    for (const auto& v : d.data()) CHECK(v == cdouble{});
}

TEST_CASE("demodulates: exact-bin tone lands in one channel") {
    constexpr std::size_t np = 16, k0 = 3;
    ComplexSignal s;
    for (std::size_t n = 0; n < 256; ++n) s.samples.push_back(std::polar(1.0, kTwoPi * double(n * k0) / double(np)));
    FamConfig cfg;
    cfg.demod_window = DemodWindow::Rectangular;
    const auto d = scf::complex_demodulates(s, cfg);
    const auto f = scf::channel_frequencies(np);
    const auto col = static_cast<std::size_t>(std::find(f.begin(), f.end(), double(k0) / double(np)) - f.begin());
    REQUIRE(col < np);
    // Rows whose frame runs past the end are zero padded; check full frames.
    for (std::size_t t = 0; t + np <= s.size(); t += 7) {
        double next = 0.0;
        for (std::size_t j = 0; j < np; ++j)
            if (j != col) next = std::max(next, std::abs(d(t, j)));
        CHECK(std::abs(d(t, col)) > 1e3 * std::max(next, 1e-300));
    }
}

TEST_CASE("demodulates: rows equal a windowed DFT with the time-reference phase") {
    const auto s = random_signal(128, 11);
    FamConfig cfg;
    const auto d = scf::complex_demodulates(s, cfg);
    const auto a = scf::window(DemodWindow::Hamming, 16);
    const auto f = scf::channel_frequencies(16);
    for (std::size_t t : {0u, 1u, 5u, 64u, 111u, 120u}) {
        for (std::size_t j = 0; j < 16; ++j) {
            cdouble ref{};
            for (std::size_t k = 0; k < 16 && t + k < s.size(); ++k)
                ref += a[k] * s.samples[t + k] * std::polar(1.0, -kTwoPi * f[j] * double(t + k));
            CHECK(std::abs(d(t, j) - ref) <= 1e-6 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("fam: 16384 samples give an 8193 x 16 one-sided matrix") {
    const auto m = scf::compute_scf(waveform::generate_noise(16384, 1));
    CHECK(m.rows() == 8193);
    CHECK(m.cols() == 16);
    CHECK(m.alpha_axis.front() == 0.0);
    CHECK(m.alpha_axis.back() == doctest::Approx(0.5));
    CHECK(m.freq_axis.front() == -0.5);
    FamConfig two;
    two.one_sided_alpha = false;
    const auto t = scf::fam_scf(waveform::generate_noise(1024, 1), two);
    CHECK(t.values.rows() == 1024);
    CHECK(t.alpha_axis[512] == 0.0);
}

TEST_CASE("fam: zeros stay zero") {
    ComplexSignal z;
    z.samples.assign(256, {});
    const auto s = scf::fam_scf(z, {});
    for (const auto& v : s.values.data()) CHECK(v == cdouble{});
}

TEST_CASE("fam: noise concentrates at alpha = 0 in every channel") {
    double mean_ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = scf::compute_scf(waveform::generate_noise(16384, 500 + seed));
        double worst = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            double off = 0.0;
            for (std::size_t q = 1; q < m.rows(); ++q) off = std::max(off, m.values(q, c));
            worst = std::max(worst, off / m.values(0, c));
        }
        mean_ratio += worst / 10.0;
    }
    CHECK(mean_ratio < 0.2);
}

TEST_CASE("fam: DSSS symbol rate stands out of its column") {
    const auto bits = waveform::random_bits(1024, 4);
    const auto s = waveform::generate_dsss(bits, 16, 0x5EED, 1);
    const auto m = scf::compute_scf(s);
    const auto row = scf::nearest_alpha_row(m, 1.0 / 16.0);
    std::size_t strong = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        std::vector<double> col(m.rows());
        for (std::size_t q = 0; q < m.rows(); ++q) col[q] = m.values(q, c);
        strong += m.values(row, c) > 5.0 * median(col);
    }
    CHECK(strong == m.cols());
}

TEST_CASE("fam: the estimate equals the channel-tapered direct-sum oracle") {
    // Away from the zero-padded tail frames the two agree closely; compare on
    // a periodic extension so every frame is full.
    const auto base = waveform::synthesize(WaveformClass::Umts, 1024, 5);
    ComplexSignal s = base;
    const auto m = scf::fam_scf(s, {});
    for (double alpha : {1.0 / 32.0, 1.0 / 16.0, 3.0 / 32.0}) {
        const auto q = scf::nearest_alpha_row(scf::scf_magnitude(m), alpha);
        const auto g = scf::channelizer_lag_kernel(DemodWindow::Hamming, 16, m.alpha_axis[q]);
        const auto o = scf::direct_scf_oracle(s, m.alpha_axis[q], g, m.freq_axis);
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < 16; ++j) {
            num += std::abs(std::abs(m.values(q, j)) - std::abs(o[j]));
            den += std::abs(o[j]);
        }
        CHECK(num / den < 0.05);
    }
}

TEST_CASE("magnitude: definition") {
    ScfComplex c;
    c.values = Matrix<cdouble>(1, 1, {3.0, 4.0});
    c.alpha_axis = {0.0};
    c.freq_axis = {0.0};
    CHECK(scf::scf_magnitude(c).values(0, 0) == 5.0);
    const auto f = scf::fam_scf(random_signal(512, 2), {});
    const auto m = scf::scf_magnitude(f);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        const auto v = f.values.data()[i];
        CHECK(m.values.data()[i] >= 0.0);
        CHECK(m.values.data()[i] == doctest::Approx(std::hypot(v.real(), v.imag())).epsilon(1e-15));
    }
}

TEST_CASE("oracle: zeros, DSSS symbol rate, noise flatness") {
    ComplexSignal z;
    z.samples.assign(128, {});
    for (const auto& v : scf::direct_scf_oracle(z, 0.1, 8)) CHECK(v == cdouble{});

    const auto bits = waveform::random_bits(1024, 6);
    const auto s = waveform::generate_dsss(bits, 16, 0x5EED, 1);
    const auto caf_on = scf::cyclic_autocorrelation(s, 1.0 / 16.0, 8);
    const auto caf_off = scf::cyclic_autocorrelation(s, 0.0371, 8);
    CHECK(std::abs(caf_on[8 + 1]) > 5.0 * std::abs(caf_off[8 + 1]));

    // alpha = 0, lag 0 is the mean power.
    const auto n = waveform::generate_noise(4096, 3);
    CHECK(scf::cyclic_autocorrelation(n, 0.0, 4)[4].real() == doctest::Approx(mean_power(n)));
    CHECK_THROWS_AS(scf::direct_scf_oracle(n, 0.1, 0), InvalidInput);
    CHECK_THROWS_AS(scf::direct_scf_oracle(n, 0.1, 2048), InvalidInput);
}

TEST_CASE("oracle: flat taper reduces to the plain oracle") {
    const auto s = random_signal(256, 9);
    const std::vector<cdouble> flat(9, 1.0);
    const auto f = scf::oracle_frequencies(4);
    const auto a = scf::direct_scf_oracle(s, 0.05, 4);
    const auto b = scf::direct_scf_oracle(s, 0.05, flat, f);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
    const std::vector<cdouble> even(8, 1.0);
    CHECK_THROWS_AS(scf::direct_scf_oracle(s, 0.05, even, f), InvalidInput);
}

TEST_CASE("fam config validation") {
    FamConfig cfg;
    CHECK_THROWS_AS(validate(cfg, 8), InvalidInput);
    cfg.l_hop = 0;
    CHECK_THROWS_AS(validate(cfg, 1024), InvalidInput);
    cfg.l_hop = 3;
    CHECK_THROWS_AS(validate(cfg, 1024), InvalidInput);
    CHECK_THROWS_AS(validate(FamConfig{}, 1000), InvalidInput);
    CHECK_NOTHROW(validate(FamConfig{}, 1024));
}

TEST_CASE("nearest alpha row") {
    const auto m = scf::compute_scf(waveform::generate_noise(1024, 2));
    CHECK(scf::nearest_alpha_row(m, 0.0) == 0);
    CHECK(scf::nearest_alpha_row(m, 1.0 / 16.0) == 64);
    CHECK(scf::nearest_alpha_row(m, 0.5) == 512);
    CHECK_THROWS_AS(scf::nearest_alpha_row(m, 0.7), InvalidInput);
    CHECK_THROWS_AS(scf::nearest_alpha_row(m, std::nan("")), InvalidInput);
}
