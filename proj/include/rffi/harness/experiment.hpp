#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rffi/harness/config.hpp"
#include "rffi/harness/dataset.hpp"
#include "rffi/harness/report.hpp"

namespace rffi::harness {

using Log = std::function<void(const std::string&)>;

/// Test-split evaluation of one dataset.
struct DatasetEval {
    std::string name;
    std::vector<double> snr_db;
    std::vector<double> accuracy;  // per SNR in snr_db
    std::map<double, ConfusionMatrix> confusion;
    int timing_fallbacks = 0;
};

/// Builds representations for `idx` (optionally after TCNN calibration) and
/// stacks them into classifier input.
ClassifierData representations_for(const LabeledDataset& d, const std::vector<std::size_t>& idx, RepKind kind,
                                   ModelState* tcnn, int workers, int* fallbacks = nullptr);

/// Accuracy on the test split at each SNR in `snrs` (all grid SNRs when empty).
DatasetEval evaluate_dataset(ModelState& classifier, const LabeledDataset& d, RepKind kind, ModelState* tcnn,
                             const std::vector<double>& snrs, int workers);

struct EnrollmentResult {
    ModelState model;
    RepKind kind = RepKind::dsq;
    std::vector<DatasetEval> evals;  // D_R0_H0.. in channel order
    MetricsReport report;
};

/// Trains a classifier on the train split at the training SNR of the source
/// receiver's channel-0 dataset.
ModelState train_enrollment_model(const ExperimentConfig& config, RepKind kind, const LabeledDataset& source_h0,
                                  const Log& log = {});

/// Trains on D_R0_H0 and evaluates the test splits of D_R0_H{channels}.
EnrollmentResult run_enrollment(const ExperimentConfig& config, RepKind kind, const std::vector<int>& channels,
                                const std::vector<double>& snrs = {}, const Log& log = {});

/// Evaluates a trained classifier on D_R{targets}_H{channels}; tcnn maps receiver
/// id to its calibration model (empty = direct deployment).
MetricsReport run_cross_receiver(const ExperimentConfig& config, ModelState& classifier, RepKind kind,
                                 const std::map<int, ModelState*>& tcnn, const std::vector<int>& targets,
                                 const std::vector<int>& channels, const std::vector<double>& snrs,
                                 const std::string& table_name, const Log& log = {});

struct CalibrationResult {
    ModelState model;
    CalibrationDataset data;
    std::size_t train_pairs = 0;
    std::size_t test_pairs = 0;
    double pre_nmse_db = 0.0;
    double post_nmse_db = 0.0;
};

CalibrationBuildOptions calibration_options(const ExperimentConfig& config);
CalibrationDataset generate_calibration(const ExperimentConfig& config, int target_receiver);
/// Trains a TCNN on the train split of `data` and scores the test split.
CalibrationResult train_calibration(const ExperimentConfig& config, CalibrationDataset data, int target_receiver,
                                    const Log& log = {});
CalibrationResult run_calibration(const ExperimentConfig& config, int target_receiver, const Log& log = {});

/// Thresholds used by the --check flag of reproduce.
struct Thresholds {
    double same_receiver_min = 0.88;
    double channel_spread_max = 0.05;
    double baseline_drop_min = 0.30;
    double cross_drop_min = 0.15;
    double nmse_pre_r1 = -21.2;
    double nmse_pre_r2 = -17.9;
    double nmse_band = 2.0;
    double nmse_post_max = -28.0;
    double recovery_min_24db = 0.85;
    double recovery_gap_max = 0.05;
};

MetricsReport reproduce_table3(const ExperimentConfig& config, const Log& log = {});
MetricsReport reproduce_table4(const ExperimentConfig& config, const Log& log = {});
MetricsReport reproduce_figure8(const ExperimentConfig& config, const Log& log = {});
MetricsReport reproduce_figure9(const ExperimentConfig& config, const Log& log = {});

/// Criterion-style checks shared by reproduce and the acceptance binary.
std::vector<Check> check_channel_robustness(const Table& dsq_acc, double snr, const Thresholds& t = {});
std::vector<Check> check_baseline_contrast(const Table& acc, const std::string& kind, double snr,
                                           const Thresholds& t = {});
std::vector<Check> check_cross_receiver_drop(double same, double r1, double r2, const Thresholds& t = {});
std::vector<Check> check_nmse(double pre_r1, double post_r1, double pre_r2, double post_r2, const Thresholds& t = {});
std::vector<Check> check_recovery(const Table& same, const Table& tcnn, const Thresholds& t = {});

std::string snr_label(double snr);

}  // namespace rffi::harness
