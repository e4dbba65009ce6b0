#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cyclosense::metrics {

// counts(t, p): examples of true class t predicted as p.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k = 0) : k_(k), counts_(k * k, 0) {}

    std::size_t classes() const noexcept { return k_; }
    std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
    void add(std::size_t truth, std::size_t pred);

    std::uint64_t total() const;
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t col_sum(std::size_t pred) const;
    std::uint64_t trace() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truth, std::size_t k);

// precision = tp / (tp + fp), recall = tp / (tp + fn), f1 their harmonic
// mean; every 0/0 is reported as 0.
struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

ClassScore score_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);
ClassScore precision_recall_f1(const ConfusionMatrix& c, std::size_t class_idx);

struct ClassMetrics {
    std::vector<ClassScore> per_class;
    ClassScore macro; // unweighted mean over classes
};
ClassMetrics class_metrics(const ConfusionMatrix& c);

double accuracy(std::span<const int> preds, std::span<const int> truth);

// Four-class exact-match rate.
double case1_accuracy(std::span<const int> preds, std::span<const int> truth);

// Sense-then-classify accuracies.
//   sensing:        prior-weighted P(flag=1|H1) P(H1) + P(flag=0|H0) P(H0),
//                   priors taken from sense_truth
//   classification: accuracy over H1-true examples
//   overall:        sensing * classification
struct Case2Accuracy {
    double p_detect_given_h1 = 0.0;
    double p_empty_given_h0 = 0.0;
    double sensing = 0.0;
    double classification = 0.0;
    double overall = 0.0;
};

Case2Accuracy case2_accuracies(std::span<const int> sense_preds, std::span<const int> sense_truth,
                               std::span<const int> cls_preds_given_h1, std::span<const int> cls_truth_given_h1);

double case2_overall(double sensing, double classification);

// Chain accuracy of the two-stage pipeline over all examples: an H0 example
// is right only if flagged empty; an H1 example only if flagged occupied and
// then classified correctly. cls_preds is ignored where sense_preds == 0.
double case2_chain_accuracy(std::span<const int> sense_preds, std::span<const int> cls_preds,
                            std::span<const int> truth4);

} // namespace cyclosense::metrics
