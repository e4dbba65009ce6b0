#include <algorithm>
#include <filesystem>

#include "doctest.h"

#include "cyclosense/detect.hpp"
#include "cyclosense/error.hpp"
#include "cyclosense/metrics.hpp"
#include "cyclosense/scf.hpp"
#include "cyclosense/waveform.hpp"

using namespace cyclosense;
using namespace cyclosense::detect;
using namespace cyclosense::metrics;

namespace {

ScfMatrix constant(std::size_t rows, std::size_t cols, double v) {
    ScfMatrix m;
    m.values = Matrix<double>(rows, cols, v);
    for (std::size_t q = 0; q < rows; ++q) m.alpha_axis.push_back(double(q) / double(2 * (rows - 1)));
    m.freq_axis = scf::channel_frequencies(cols);
    return m;
}

} // namespace

TEST_CASE("cfd statistic: constant, single peak, scale invariance") {
    auto m = constant(65, 4, 2.0);
    const std::vector<double> alphas{0.25};
    CHECK(cfd_statistic(m, alphas) == doctest::Approx(1.0));
    m.values(scf::nearest_alpha_row(m, 0.25), 2) = 20.0;
    CHECK(cfd_statistic(m, alphas) == doctest::Approx(10.0));
    auto s = m;
    for (double& v : s.values.data()) v *= 4.0;
    CHECK(cfd_statistic(s, alphas) == cfd_statistic(m, alphas));
    CHECK_THROWS_AS(cfd_statistic(m, std::vector<double>{}), InvalidInput);
}

TEST_CASE("quantile and calibration") {
    std::vector<double> v{4, 1, 3, 2, 5};
    CHECK(empirical_quantile(v, 0.5) == 3.0);
    CHECK(empirical_quantile(v, 0.0) == 1.0);
    CHECK(empirical_quantile(v, 1.0) == 5.0);
    CHECK(empirical_quantile({1, 2}, 0.25) == doctest::Approx(1.25));

    std::vector<double> stats(kMinCalibrationSize);
    for (std::size_t i = 0; i < stats.size(); ++i) stats[i] = double(i);
    CfarConfig cfg;
    cfg.alpha_candidates = {0.1};
    cfg.target_pfa = 0.5;
    CHECK(calibrate_threshold_from_statistics(stats, cfg) == doctest::Approx(empirical_quantile(stats, 0.5)));

    std::vector<double> same(kMinCalibrationSize, 1.7);
    cfg.target_pfa = 0.05;
    const double t = calibrate_threshold_from_statistics(same, cfg);
    CHECK(t == 1.7);
    // Strict comparison: identical statistics never alarm.
    CHECK_FALSE(1.7 > t);

    std::vector<double> small(10, 1.0);
    CHECK_THROWS_AS(calibrate_threshold_from_statistics(small, cfg), InvalidInput);
    cfg.target_pfa = 0.0;
    CHECK_THROWS_AS(validate(cfg), InvalidInput);
}

TEST_CASE("cfar: calibrated threshold holds the false-alarm rate on held-out noise") {
    CfarConfig cfg;
    cfg.alpha_candidates = dsss_alpha_candidates(16, 2);
    cfg.target_pfa = 0.05;
    std::vector<double> cal, held;
    for (std::uint64_t s = 0; s < 400; ++s)
        cal.push_back(cfd_statistic(scf::compute_scf(waveform::generate_noise(2048, 1000 + s)), cfg.alpha_candidates));
    const double t = calibrate_threshold_from_statistics(cal, cfg);
    std::size_t alarms = 0;
    for (std::uint64_t s = 0; s < 400; ++s) {
        const auto d = cfar_detect(scf::compute_scf(waveform::generate_noise(2048, 5000 + s)), t, cfg);
        alarms += d.occupied;
    }
    const double pfa = double(alarms) / 400.0;
    // Binomial 3-sigma band at n = 400.
    CHECK(pfa > 0.05 - 0.033);
    CHECK(pfa < 0.05 + 0.033);

    std::size_t hits = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto r = waveform::generate_record(WaveformClass::Umts, 10.0, 2048, 70 + s);
        hits += cfar_detect(scf::compute_scf(r.signal), t, cfg).occupied;
    }
    CHECK(hits >= 48);
}

TEST_CASE("cnn decision rule is strict") {
    CHECK_FALSE(decide_from_probability(0.5).occupied);
    CHECK(decide_from_probability(0.5000001).occupied);
    CHECK(decide_from_probability(0.7).threshold == 0.5);
}

TEST_CASE("dsss alpha candidates") {
    const auto a = dsss_alpha_candidates(16, 2);
    REQUIRE(a.size() == 3);
    CHECK(a[0] == doctest::Approx(1.0 / 32.0));
    CHECK(a[1] == doctest::Approx(2.0 / 32.0));
}

TEST_CASE("calibration record round trip") {
    const auto path = std::filesystem::temp_directory_path() / "cyclosense_unit_cal.txt";
    save_calibration(path, {0.1, 3.25, 1000, 42});
    const auto r = load_calibration(path);
    CHECK(r.target_pfa == 0.1);
    CHECK(r.threshold == 3.25);
    CHECK(r.calibration_size == 1000);
    CHECK(r.seed == 42);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_calibration(path), FileNotFound);
}

TEST_CASE("confusion counts") {
    const std::vector<int> truth{0, 0, 1}, preds{0, 1, 1};
    const auto c = confusion(preds, truth, 2);
    CHECK(c(0, 0) == 1);
    CHECK(c(0, 1) == 1);
    CHECK(c(1, 1) == 1);
    CHECK(c(1, 0) == 0);
    CHECK(c.total() == 3);
    const auto e = confusion({}, {}, 3);
    CHECK(e.total() == 0);
    const auto d = confusion(truth, truth, 2);
    CHECK(d.trace() == d.total());
    const std::vector<int> bad{0, 3};
    CHECK_THROWS_AS(confusion(bad, bad, 3), InvalidInput);
    CHECK_THROWS_AS(confusion(preds, std::vector<int>{0}, 2), InvalidInput);
}

TEST_CASE("precision, recall, F1") {
    const auto s = score_from_counts(2, 1, 1);
    CHECK(s.precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.recall == doctest::Approx(2.0 / 3.0));
    CHECK(s.f1 == doctest::Approx(2.0 / 3.0));
    const auto g = score_from_counts(0, 0, 5);
    CHECK(g.precision == 0.0);
    CHECK(g.recall == 0.0);
    CHECK(g.f1 == 0.0);
    const std::vector<int> t{0, 1, 2, 2};
    const auto m = class_metrics(confusion(t, t, 3));
    for (const auto& c : m.per_class) {
        CHECK(c.precision == 1.0);
        CHECK(c.recall == 1.0);
        CHECK(c.f1 == 1.0);
    }
    CHECK(m.macro.f1 == 1.0);
}

TEST_CASE("accuracies") {
    const std::vector<int> t{0, 1, 2, 3};
    CHECK(case1_accuracy(t, t) == 1.0);
    const std::vector<int> half{0, 1, 0, 0};
    CHECK(case1_accuracy(half, t) == 0.5);
    CHECK(accuracy({}, {}) == 0.0);
}

TEST_CASE("case2: product rule and prior weighting") {
    CHECK(case2_overall(0.96, 0.985) == doctest::Approx(0.9456).epsilon(1e-15));
    const std::vector<int> st{1, 1, 0, 0}, sp{1, 0, 0, 0};
    const std::vector<int> ct{1, 2}, cp{1, 2};
    const auto a = case2_accuracies(sp, st, cp, ct);
    CHECK(a.p_detect_given_h1 == 0.5);
    CHECK(a.p_empty_given_h0 == 1.0);
    CHECK(a.sensing == 0.75);
    CHECK(a.classification == 1.0);
    CHECK(a.overall == 0.75);
    const auto p = case2_accuracies(st, st, cp, ct);
    CHECK(p.overall == 1.0);

    // A detector that flags everything loses on H0 only.
    const std::vector<int> all{1, 1, 1, 1};
    const auto f = case2_accuracies(all, st, cp, ct);
    CHECK(f.sensing == 0.5);
    CHECK(f.classification == 1.0);
}

TEST_CASE("case2 chain accuracy") {
    const std::vector<int> truth{0, 0, 1, 2, 3};
    const std::vector<int> sense{0, 1, 1, 0, 1};
    const std::vector<int> cls{9, 1, 1, 2, 2};
    // H0 flagged empty: right. H0 flagged: wrong. 1 -> 1 right. 2 missed: wrong. 3 -> 2 wrong.
    CHECK(case2_chain_accuracy(sense, cls, truth) == doctest::Approx(2.0 / 5.0));
    const std::vector<int> perfect_sense{0, 0, 1, 1, 1};
    const std::vector<int> perfect_cls{0, 0, 1, 2, 3};
    CHECK(case2_chain_accuracy(perfect_sense, perfect_cls, truth) == 1.0);
}
