#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cyclosense/dataio.hpp"
#include "cyclosense/features.hpp"
#include "cyclosense/scf.hpp"
#include "cyclosense/train.hpp"
#include "cyclosense/waveform.hpp"

namespace cyclosense::pipeline {

using json = nlohmann::ordered_json;

enum class Mode { Case1, Case2, FeatureSweep, CropSweep, SenseCompare };
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

struct ExperimentConfig {
    std::vector<WaveformClass> classes{WaveformClass::Noise, WaveformClass::Gsm, WaveformClass::Umts,
                                       WaveformClass::Lte};
    std::vector<double> snr_levels_db{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    std::size_t per_class_per_snr = 40;
    std::size_t record_length = 16384;
    FamConfig fam;
    waveform::ClassProfile profile;
    ChannelConfig channel;

    FeatureKind feature_kind = FeatureKind::SCF_CROP;
    std::size_t crop_rows = 16;
    std::size_t crop_cols = 16;
    Normalization normalization = Normalization::MaxAbs;
    // I/Q, AP and FFT features use the first raw_window samples of a record.
    std::size_t raw_window = 256;

    double train_fraction = 0.6;
    // CASE2 adds noise records so H0 and H1 are equally large.
    bool balance_h0 = true;
    nn::TrainConfig train;

    std::vector<FeatureKind> sweep_features{FeatureKind::IQ, FeatureKind::AP, FeatureKind::FFT,
                                            FeatureKind::SCF_CROP};
    // 0 stands for the full matrix.
    std::vector<std::size_t> sweep_crop_rows{4, 8, 16, 32, 64, 128, 0};
    // Full-matrix sizes are timed on this many examples and not trained to
    // convergence.
    std::size_t timing_examples = 4;
    std::size_t timing_batch = 2;
    bool crop_sweep_train_full = false;

    std::vector<double> target_pfa{0.05, 0.1};
    std::size_t cfar_calibration_size = 1000;

    Mode mode = Mode::Case1;
    std::optional<std::uint64_t> seed;
};

void validate(const ExperimentConfig& cfg);
json to_json(const ExperimentConfig& cfg);
// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct RecordKey {
    WaveformClass cls = WaveformClass::Noise;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    std::size_t index = 0; // position within its (class, snr) stratum
};

// Every (class, snr) stratum gets per_class_per_snr records, noise gets
// `noise_multiplier` times as many. Record seeds depend only on
// (cfg.seed, class, snr index, position) so enlarging a stratum keeps the
// existing records.
std::vector<RecordKey> plan_records(const ExperimentConfig& cfg, std::size_t noise_multiplier = 1);
std::uint64_t record_seed(std::uint64_t base, WaveformClass cls, std::size_t snr_index, std::size_t k);

struct FeatureNeeds {
    std::size_t crop_rows = 0; // largest crop kept, 0 for none
    bool raw = false;          // I/Q, AP and FFT windows
    bool cfar = false;         // CFAR statistic on the full matrix
};
FeatureNeeds needs_for(const ExperimentConfig& cfg);

struct Sample {
    RecordKey key;
    ScfMatrix crop; // first crop_rows alpha rows, all channels, unnormalized
    ComplexSignal window;
    double cfar_statistic = 0.0;
};

Sample make_sample(const RecordKey& key, const ComplexSignal& record, const ExperimentConfig& cfg,
                   const FeatureNeeds& needs);
std::vector<Sample> synthesize_samples(const std::vector<RecordKey>& keys, const ExperimentConfig& cfg,
                                       const FeatureNeeds& needs);
// I/Q records listed in a manifest; classes and SNRs not in cfg are skipped.
std::vector<Sample> load_samples(const dataio::DatasetManifest& manifest, const ExperimentConfig& cfg,
                                 const FeatureNeeds& needs);

// Same record as synthesize_samples would draw for `key`.
waveform::Record regenerate(const RecordKey& key, const ExperimentConfig& cfg);

// Normalized network input. For SCF_CROP, rows = 0 means cfg.crop_rows.
FeatureMatrix feature_of(const Sample& s, FeatureKind kind, std::size_t rows, const ExperimentConfig& cfg);

// Stratified by (class, snr) and by blocks of block_size consecutive record
// indices: round(train_fraction * n) of each block go to train. Blocks are
// split independently, so a larger stratum extends a smaller one's split.
struct SampleSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
SampleSplit split_samples(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed,
                          std::size_t block_size);

struct Prediction {
    std::string experiment;
    std::uint64_t seed = 0;
    int label = 0;
    double snr_db = 0.0;
    int predicted = 0;
    double score = 0.0;
    bool operator==(const Prediction&) const = default;
};

struct ExperimentReport {
    Mode mode = Mode::Case1;
    json config;
    // experiment name -> class labels it distinguishes
    std::map<std::string, std::vector<int>> experiments;
    std::vector<Prediction> predictions;
    json extras = json::object(); // thresholds, epochs run, calibration
    json timing = json::object(); // wall-clock numbers, kept apart
};

// Per-SNR and overall numbers derived from the prediction log only.
json summarize(const ExperimentReport& r);

// CASE1-style classifier over cfg.classes on the training split.
struct ClassifierRun {
    nn::Model model;
    nn::TrainHistory history;
};
ClassifierRun train_classifier(const ExperimentConfig& cfg, const std::vector<Sample>& samples);
// Test-split predictions of a trained classifier, logged as experiment "case1".
ExperimentReport evaluate_classifier(const ExperimentConfig& cfg, const nn::Model& model,
                                     const std::vector<Sample>& samples);

ExperimentReport run_case1(const ExperimentConfig& cfg, const std::vector<Sample>& samples);
ExperimentReport run_case2(const ExperimentConfig& cfg, const std::vector<Sample>& samples);
ExperimentReport run_feature_sweep(const ExperimentConfig& cfg, const std::vector<Sample>& samples);
ExperimentReport run_crop_sweep(const ExperimentConfig& cfg, const std::vector<Sample>& samples);
ExperimentReport run_sense_compare(const ExperimentConfig& cfg, const std::vector<Sample>& samples);

// Records the mode needs, synthesized from the seed.
std::vector<Sample> synthesize_for(const ExperimentConfig& cfg);
// Builds the records the mode needs (synthesized from the seed) and runs it.
ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::vector<Sample>& samples);

// Accessors over a report for the numbers the experiments are judged by.
std::map<double, double> accuracy_curve(const ExperimentReport& r, const std::string& experiment);
std::map<double, double> macro_f1_curve(const ExperimentReport& r, const std::string& experiment);
std::map<double, double> detection_curve(const ExperimentReport& r, const std::string& experiment);
double false_alarm_rate(const ExperimentReport& r, const std::string& experiment);
// P_S, P_C and their product per SNR for a CASE2 report.
struct Case2Point {
    double sensing = 0.0;
    double classification = 0.0;
    double overall = 0.0;
    double chain = 0.0;
};
std::map<double, Case2Point> case2_curve(const ExperimentReport& r);

// report.json, predictions.csv, timing.json, tables and plot-data files.
void write_report(const ExperimentReport& r, const std::filesystem::path& out_dir);
ExperimentReport load_report(const std::filesystem::path& dir);
// Re-derives every table and plot file of a saved report into out_dir.
void cmd_report(const std::filesystem::path& report_dir, const std::filesystem::path& out_dir);

struct GenerateResult {
    dataio::DatasetManifest manifest;
    std::size_t records = 0;
};
GenerateResult cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
// Adds one .scf file per I/Q record and rewrites the manifest.
dataio::DatasetManifest cmd_scf(const std::filesystem::path& dataset, const FamConfig& fam);

} // namespace cyclosense::pipeline
