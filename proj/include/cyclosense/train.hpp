#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "cyclosense/features.hpp"
#include "cyclosense/model.hpp"

namespace cyclosense::nn {

struct TrainConfig {
    double learning_rate = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    std::size_t early_stop_patience = 10;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// Bias-corrected Adam update of one parameter at step t (t >= 1).
void adam_step(Param& p, std::uint64_t t, const TrainConfig& cfg);

// Validation-loss monitor. update() returns true once `patience` consecutive
// epochs have passed without a strict improvement on the best loss.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    bool update(double val_loss);

    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_loss() const noexcept { return best_; }
    std::size_t epochs_seen() const noexcept { return seen_; }

private:
    std::size_t patience_;
    std::size_t seen_ = 0;
    std::size_t best_epoch_ = 0;
    double best_ = 0.0;
    bool has_best_ = false;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0; // running accuracy over the epoch's batches
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    bool early_stopped = false;
    std::size_t best_epoch = 0;
};

struct TrainResult {
    Model model; // weights at the end of the last epoch run
    TrainHistory history;
};

// Indices into `data` for train/validation, stratified by (label, snr_db).
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};
SplitIndices stratified_validation_split(std::span<const FeatureMatrix> data, double val_fraction,
                                         std::uint64_t seed);

// Labels come from FeatureMatrix::meta.label and must lie in [0, num_classes).
TrainResult train(Model model, std::span<const FeatureMatrix> data, const TrainConfig& cfg);
TrainResult train(Model model, std::span<const FeatureMatrix> train_set,
                  std::span<const FeatureMatrix> val_set, const TrainConfig& cfg);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> predictions;
};
Evaluation evaluate(const Model& model, std::span<const FeatureMatrix> data, std::size_t batch_size = 64);

// Class probabilities for one feature matrix (fed as H x W x 1).
std::vector<double> predict(const Model& model, const FeatureMatrix& m);
std::vector<std::vector<double>> predict_batch(const Model& model, std::span<const FeatureMatrix> data,
                                               std::size_t batch_size = 64);
int argmax(std::span<const double> p);

struct StepResult {
    double loss = 0.0;       // mean over the batch
    std::size_t correct = 0; // argmax hits before the update
};
// One forward/backward/Adam step on a batch.
StepResult train_step(Model& model, std::span<const FeatureMatrix* const> batch, const TrainConfig& cfg);

// Checkpoint: "CSNN" v1 header with the layer table, float32 weights, then
// Adam moments; hyperparameters go to <path>.json.
void save_model(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg);
Model load_model(const std::filesystem::path& path);
TrainConfig load_train_config(const std::filesystem::path& model_path);

} // namespace cyclosense::nn
