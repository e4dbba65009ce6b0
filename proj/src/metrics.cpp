#include "cyclosense/metrics.hpp"

#include <string>

#include "cyclosense/error.hpp"

namespace cyclosense::metrics {

void ConfusionMatrix::add(std::size_t truth, std::size_t pred) {
    if (truth >= k_ || pred >= k_) throw InvalidInput("label outside confusion matrix");
    ++counts_[truth * k_ + pred];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < k_; ++p) s += (*this)(truth, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t t = 0; t < k_; ++t) s += (*this)(t, pred);
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, i);
    return s;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truth, std::size_t k) {
    if (preds.size() != truth.size())
        throw InvalidInput("prediction and truth lists differ in length (" + std::to_string(preds.size()) +
                           " vs " + std::to_string(truth.size()) + ")");
    ConfusionMatrix c(k);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || truth[i] < 0) throw InvalidInput("negative label");
        c.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(preds[i]));
    }
    return c;
}

ClassScore score_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    ClassScore s;
    const auto ratio = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    const double sum = s.precision + s.recall;
    s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
    return s;
}

ClassScore precision_recall_f1(const ConfusionMatrix& c, std::size_t class_idx) {
    if (class_idx >= c.classes()) throw InvalidInput("class index outside confusion matrix");
    const auto tp = c(class_idx, class_idx);
    return score_from_counts(tp, c.col_sum(class_idx) - tp, c.row_sum(class_idx) - tp);
}

ClassMetrics class_metrics(const ConfusionMatrix& c) {
    ClassMetrics m;
    for (std::size_t k = 0; k < c.classes(); ++k) m.per_class.push_back(precision_recall_f1(c, k));
    if (!m.per_class.empty()) {
        for (const auto& s : m.per_class) {
            m.macro.precision += s.precision;
            m.macro.recall += s.recall;
            m.macro.f1 += s.f1;
        }
        const auto n = static_cast<double>(m.per_class.size());
        m.macro.precision /= n;
        m.macro.recall /= n;
        m.macro.f1 /= n;
    }
    return m;
}

double accuracy(std::span<const int> preds, std::span<const int> truth) {
    if (preds.size() != truth.size()) throw InvalidInput("prediction and truth lists differ in length");
    if (preds.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double case1_accuracy(std::span<const int> preds, std::span<const int> truth) { return accuracy(preds, truth); }

double case2_overall(double sensing, double classification) { return sensing * classification; }

Case2Accuracy case2_accuracies(std::span<const int> sense_preds, std::span<const int> sense_truth,
                               std::span<const int> cls_preds_given_h1, std::span<const int> cls_truth_given_h1) {
    if (sense_preds.size() != sense_truth.size()) throw InvalidInput("sensing lists differ in length");
    if (cls_preds_given_h1.size() != cls_truth_given_h1.size())
        throw InvalidInput("classification lists differ in length");
    if (cls_truth_given_h1.empty()) throw InvalidInput("classification accuracy needs H1 examples");

    std::size_t n1 = 0, n0 = 0, hit1 = 0, hit0 = 0;
    for (std::size_t i = 0; i < sense_truth.size(); ++i) {
        if (sense_truth[i] != 0) {
            ++n1;
            hit1 += sense_preds[i] != 0 ? 1 : 0;
        } else {
            ++n0;
            hit0 += sense_preds[i] == 0 ? 1 : 0;
        }
    }
    Case2Accuracy a;
    const double total = static_cast<double>(n0 + n1);
    a.p_detect_given_h1 = n1 ? static_cast<double>(hit1) / static_cast<double>(n1) : 0.0;
    a.p_empty_given_h0 = n0 ? static_cast<double>(hit0) / static_cast<double>(n0) : 0.0;
    if (total > 0.0)
        a.sensing = a.p_detect_given_h1 * (static_cast<double>(n1) / total) +
                    a.p_empty_given_h0 * (static_cast<double>(n0) / total);
    a.classification = accuracy(cls_preds_given_h1, cls_truth_given_h1);
    a.overall = case2_overall(a.sensing, a.classification);
    return a;
}

double case2_chain_accuracy(std::span<const int> sense_preds, std::span<const int> cls_preds,
                            std::span<const int> truth4) {
    if (sense_preds.size() != truth4.size() || cls_preds.size() != truth4.size())
        throw InvalidInput("chain lists differ in length");
    if (truth4.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth4.size(); ++i) {
        if (truth4[i] == 0) hits += sense_preds[i] == 0 ? 1 : 0;
        else hits += (sense_preds[i] != 0 && cls_preds[i] == truth4[i]) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(truth4.size());
}

} // namespace cyclosense::metrics
