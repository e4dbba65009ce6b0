#include "cyclosense/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "cyclosense/error.hpp"
#include "cyclosense/train.hpp"

namespace cyclosense::detect {

void validate(const CfarConfig& cfg) {
    if (!(cfg.target_pfa > 0.0 && cfg.target_pfa < 1.0)) throw InvalidInput("target_pfa must be in (0, 1)");
    if (cfg.alpha_candidates.empty()) throw InvalidInput("CFAR needs at least one candidate cyclic frequency");
}

double cfd_statistic(const ScfMatrix& m, std::span<const double> alphas) {
    if (alphas.empty()) throw InvalidInput("cfd_statistic needs candidate cyclic frequencies");
    if (m.rows() < 2 || m.cols() == 0) throw InvalidInput("SCF matrix too small for cfd_statistic");

    std::vector<std::size_t> rows;
    for (double a : alphas) rows.push_back(scf::nearest_alpha_row(m, a));
    const std::size_t zero_row = scf::nearest_alpha_row(m, 0.0);

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> column;
    column.reserve(m.rows());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        column.clear();
        for (std::size_t r = 0; r < m.rows(); ++r) {
            if (r != zero_row) column.push_back(m.values(r, c));
        }
        const auto mid = column.begin() + static_cast<std::ptrdiff_t>(column.size() / 2);
        std::nth_element(column.begin(), mid, column.end());
        double median = *mid;
        if (column.size() % 2 == 0) {
            const double lower = *std::max_element(column.begin(), mid);
            median = 0.5 * (median + lower);
        }
        for (auto r : rows) {
            const double v = m.values(r, c);
            double ratio;
            if (median > 0.0) ratio = v / median;
            else ratio = v > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
            best = std::max(best, ratio);
        }
    }
    return best;
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double calibrate_threshold_from_statistics(std::span<const double> statistics, const CfarConfig& cfg) {
    if (!(cfg.target_pfa > 0.0 && cfg.target_pfa < 1.0)) throw InvalidInput("target_pfa must be in (0, 1)");
    if (statistics.size() < kMinCalibrationSize)
        throw InvalidInput("calibration needs at least " + std::to_string(kMinCalibrationSize) +
                           " noise-only examples, got " + std::to_string(statistics.size()));
    return empirical_quantile({statistics.begin(), statistics.end()}, 1.0 - cfg.target_pfa);
}

double calibrate_threshold(std::span<const ScfMatrix> noise_scfs, const CfarConfig& cfg) {
    validate(cfg);
    if (noise_scfs.size() < kMinCalibrationSize)
        throw InvalidInput("calibration needs at least " + std::to_string(kMinCalibrationSize) +
                           " noise-only matrices, got " + std::to_string(noise_scfs.size()));
    std::vector<double> stats;
    stats.reserve(noise_scfs.size());
    for (const auto& m : noise_scfs) stats.push_back(cfd_statistic(m, cfg.alpha_candidates));
    return calibrate_threshold_from_statistics(stats, cfg);
}

Decision cfar_detect(const ScfMatrix& m, double threshold, const CfarConfig& cfg) {
    Decision d;
    d.statistic = cfd_statistic(m, cfg.alpha_candidates);
    d.threshold = threshold;
    d.occupied = d.statistic > threshold;
    return d;
}

Decision decide_from_probability(double p_signal) {
    return {p_signal > 0.5, p_signal, 0.5};
}

Decision cnn_detect(const nn::Model& model2class, const FeatureMatrix& m) {
    if (model2class.num_classes() != 2) throw InvalidInput("CNN detector must have exactly two outputs");
    const auto p = nn::predict(model2class, m);
    return decide_from_probability(p[1]);
}

std::vector<double> dsss_alpha_candidates(int spreading_factor, int samples_per_chip) {
    const double rate = 1.0 / (static_cast<double>(spreading_factor) * samples_per_chip);
    return {rate, 2.0 * rate, 3.0 * rate};
}

void save_calibration(const std::filesystem::path& path, const CalibrationRecord& rec) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw InvalidInput("cannot write " + path.string());
    os.precision(17);
    os << "target_pfa=" << rec.target_pfa << '\n'
       << "threshold=" << rec.threshold << '\n'
       << "calibration_size=" << rec.calibration_size << '\n'
       << "seed=" << rec.seed << '\n';
}

CalibrationRecord load_calibration(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FileNotFound(path.string());
    CalibrationRecord rec;
    std::string line;
    int seen = 0;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const auto key = line.substr(0, eq);
        const auto val = line.substr(eq + 1);
        try {
            if (key == "target_pfa") rec.target_pfa = std::stod(val), ++seen;
            else if (key == "threshold") rec.threshold = std::stod(val), ++seen;
            else if (key == "calibration_size") rec.calibration_size = std::stoull(val), ++seen;
            else if (key == "seed") rec.seed = std::stoull(val), ++seen;
        } catch (const std::exception&) {
            throw FormatError("bad value for " + key + " in " + path.string());
        }
    }
    if (seen != 4) throw FormatError("incomplete calibration record " + path.string());
    return rec;
}

} // namespace cyclosense::detect
