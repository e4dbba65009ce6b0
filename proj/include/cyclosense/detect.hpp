#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cyclosense/features.hpp"
#include "cyclosense/model.hpp"
#include "cyclosense/scf.hpp"

namespace cyclosense::detect {

struct CfarConfig {
    std::vector<double> alpha_candidates; // cycles/sample
    double target_pfa = 0.05;
    std::size_t calibration_size = 1000;
    std::uint64_t seed = 0;
};

void validate(const CfarConfig& cfg);

// occupied <=> statistic > threshold
struct Decision {
    bool occupied = false;
    double statistic = 0.0;
    double threshold = 0.0;
};

inline constexpr std::size_t kMinCalibrationSize = 200;

// max over candidate alpha bins and channels of
//   |S(alpha, f)| / median_{alpha' != 0} |S(alpha', f)|.
// Ratio form, so scaling the matrix by any c > 0 leaves it unchanged.
double cfd_statistic(const ScfMatrix& m, std::span<const double> alphas);

// Linear-interpolated empirical quantile (type 7) of a multiset.
double empirical_quantile(std::vector<double> values, double q);

// (1 - target_pfa) quantile of cfd_statistic over noise-only matrices.
double calibrate_threshold(std::span<const ScfMatrix> noise_scfs, const CfarConfig& cfg);
// Same, from precomputed statistics.
double calibrate_threshold_from_statistics(std::span<const double> statistics, const CfarConfig& cfg);

Decision cfar_detect(const ScfMatrix& m, double threshold, const CfarConfig& cfg);

// Two-class CNN (0 = noise, 1 = signal): statistic = p(signal), threshold 0.5,
// occupied only when p(signal) is strictly larger.
Decision cnn_detect(const nn::Model& model2class, const FeatureMatrix& m);
Decision decide_from_probability(double p_signal);

// Symbol rate of the DSSS stand-in and its first two harmonics.
std::vector<double> dsss_alpha_candidates(int spreading_factor, int samples_per_chip);

// Text record: target_pfa, threshold, calibration_size, seed (key=value lines).
struct CalibrationRecord {
    double target_pfa = 0.0;
    double threshold = 0.0;
    std::size_t calibration_size = 0;
    std::uint64_t seed = 0;
};
void save_calibration(const std::filesystem::path& path, const CalibrationRecord& rec);
CalibrationRecord load_calibration(const std::filesystem::path& path);

} // namespace cyclosense::detect
