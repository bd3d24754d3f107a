#pragma once

#include <span>
#include <vector>

namespace rffi::harness {

using ConfusionMatrix = std::vector<std::vector<long>>;

/// Correct / total. Throws EmptyInput on empty input.
double compute_pcc(std::span<const int> predictions, std::span<const int> truths);

/// Entry (i, j) counts truth i predicted j.
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truths, int classes);

double trace_ratio(const ConfusionMatrix& m);

}  // namespace rffi::harness
