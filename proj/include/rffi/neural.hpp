#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rffi/calibration.hpp"
#include "rffi/dsp_frontend.hpp"
#include "rffi/nn/layers.hpp"
#include "rffi/types.hpp"

namespace rffi {

struct ClassifierConfig {
    int input_len = 100;
    std::vector<int> conv_filters = {32, 64, 128};
    int kernel = 3;
    int stride = 2;
    int padding = 1;
    double leaky_slope = 0.01;
    int pool = 2;
    int classes = 12;
    double l2_strength = 0.001;
    double lr = 0.001;
    int lr_decay_every = 50;
    double lr_decay_factor = 0.5;
    int epochs = 200;
    int batch = 320;

    void validate() const;
    /// Flattened feature count after the three conv/pool blocks.
    int flat_features() const;
};

struct TcnnConfig {
    int input_dim = 6;
    std::vector<int> hidden = {40, 40, 40};
    int output_dim = 2;
    double leaky_slope = 0.01;
    double lr = 0.0001;
    int epochs = 100;
    int batch = 1024;

    void validate() const;
};

enum class ModelKind { dsqcnn, tcnn };
enum class Mode { train, eval };

std::string to_string(ModelKind k);

/// Network weights, batch-norm statistics, Adam moments and training bookkeeping.
class ModelState {
public:
    ModelKind kind = ModelKind::dsqcnn;
    ClassifierConfig classifier;
    TcnnConfig tcnn;
    std::string representation = "dsq";  // classifier input kind
    std::uint64_t seed = 0;
    int epoch = 0;
    long adam_step = 0;
    std::vector<double> loss_history;
    std::vector<double> val_history;  // classifier validation accuracy per epoch, when tracked
    int best_epoch = -1;
    nn::Sequential net;

    ModelState() = default;
    ModelState(ModelState&&) = default;
    ModelState& operator=(ModelState&&) = default;

    ModelState clone() const;
    std::size_t parameter_count();
    /// Sets every trainable parameter to zero (test fixture).
    void zero_parameters();
    /// Copies parameter values, moments and buffers from a model with the same architecture.
    void copy_weights_from(const ModelState& other);
};

ModelState build_dsqcnn(const ClassifierConfig& config, std::uint64_t seed);
ModelState build_tcnn(const TcnnConfig& config, std::uint64_t seed);

/// (N, 2, L) -> (N, classes) probabilities.
nn::Tensor classifier_forward(ModelState& model, const nn::Tensor& batch, Mode mode);

struct ClassifierData {
    nn::Tensor x;  // (N, 2, L)
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

ClassifierData make_classifier_data(const std::vector<Representation>& reps, const std::vector<int>& labels);

struct ClassifierTrainOptions {
    std::uint64_t shuffle_seed = 1;
    /// When set, accuracy on this set is tracked per epoch and the weights of
    /// the best epoch (earliest on ties) are restored at the end.
    const ClassifierData* validation = nullptr;
    std::function<void(int epoch, double loss)> on_epoch;
};

/// Adam with step decay on cross-entropy + l2_strength * sum of squared weights.
ModelState& train_classifier(ModelState& model, const ClassifierData& data, const ClassifierConfig& config,
                             const ClassifierTrainOptions& opts = {});

/// Mean training loss of one pass in train mode without updating anything.
double classifier_loss(ModelState& model, const ClassifierData& data, double l2_strength);

/// Index of the largest value, lowest index on ties.
int argmax_first(std::span<const double> v);
int predict_label(ModelState& model, const Representation& rep);
std::vector<int> predict_labels(ModelState& model, const nn::Tensor& x);
double accuracy(ModelState& model, const ClassifierData& data);

std::array<double, 6> augment_input(Complex sample);

struct TcnnTrainOptions {
    std::uint64_t shuffle_seed = 1;
    std::function<void(int epoch, double loss)> on_epoch;
};

/// Per-sample regression from augmented target-receiver samples to the
/// time-aligned source-receiver samples, loss (1/2Nb) sum |error|^2.
ModelState& train_tcnn(ModelState& model, const CalibrationDataset& pairs, const TcnnConfig& config,
                       const TcnnTrainOptions& opts = {});

ComplexFrame calibrate_sequence(ModelState& model, const ComplexFrame& frame);

/// Loss used by gradient_check and training.
/// Classifier: labels is (N) class ids. TCNN: batch is (N, 6), labels (N, 2).
double model_loss(ModelState& model, const nn::Tensor& batch, const nn::Tensor& labels, bool with_grad);

/// Gradients smaller than this are compared absolutely: central differences
/// with step 1e-5 in double carry about 1e-11 of rounding noise.
inline constexpr double kGradientFloor = 1e-5;

struct GradientCheck {
    double max_relative = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, kGradientFloor)
    double max_absolute = 0.0;
};

/// Central differences with `step` against back-propagation, parameter by
/// parameter. Batch norm runs in train mode with frozen running statistics.
GradientCheck gradient_check_detail(ModelState& model, const nn::Tensor& batch, const nn::Tensor& labels,
                                    double step = 1e-5);
/// Max relative error of gradient_check_detail.
double gradient_check(ModelState& model, const nn::Tensor& batch, const nn::Tensor& labels, double step = 1e-5);

void save_model(const ModelState& model, const std::string& path);
ModelState load_model(const std::string& path);

}  // namespace rffi
