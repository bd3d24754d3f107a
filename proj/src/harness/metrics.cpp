#include "rffi/harness/metrics.hpp"

#include "rffi/types.hpp"

namespace rffi::harness {

double compute_pcc(std::span<const int> predictions, std::span<const int> truths) {
    if (predictions.empty()) throw EmptyInput("no predictions");
    if (predictions.size() != truths.size()) throw ShapeMismatch("prediction and truth counts differ");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) ok += predictions[i] == truths[i];
    return static_cast<double>(ok) / static_cast<double>(predictions.size());
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truths, int classes) {
    if (predictions.size() != truths.size()) throw ShapeMismatch("prediction and truth counts differ");
    ConfusionMatrix m(static_cast<std::size_t>(classes), std::vector<long>(static_cast<std::size_t>(classes), 0));
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int t = truths[i], p = predictions[i];
        if (t < 0 || t >= classes || p < 0 || p >= classes) throw LabelOutOfRange("label outside [0, classes)");
        ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return m;
}

double trace_ratio(const ConfusionMatrix& m) {
    long tr = 0, tot = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            tot += m[i][j];
            if (i == j) tr += m[i][j];
        }
    if (tot == 0) throw EmptyInput("empty confusion matrix");
    return static_cast<double>(tr) / static_cast<double>(tot);
}

}  // namespace rffi::harness
