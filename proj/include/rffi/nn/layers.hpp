#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rffi/nn/tensor.hpp"

namespace rffi {
class Rng;
}

namespace rffi::nn {

/// Trainable tensor plus its gradient and Adam moments.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
    bool decay = false;  // included in the l2 penalty

    Param(std::string n, std::vector<int> shape, bool l2);
};

/// Non-trainable state that is still serialized (batch-norm running stats).
struct Buffer {
    std::string name;
    Tensor value;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    /// Gradient w.r.t. the input of the most recent forward; accumulates into param grads.
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::vector<Buffer*> buffers() { return {}; }
    virtual void init(Rng&) {}
};

/// (N, Cin, L) -> (N, Cout, Lout)
class Conv1d : public Layer {
public:
    Conv1d(std::string name, int cin, int cout, int kernel, int stride, int pad);
    std::string kind() const override { return "conv1d"; }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& g) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }
    void init(Rng& rng) override;
    int out_len(int l) const { return (l + 2 * pad_ - k_) / stride_ + 1; }

private:
    int cin_, cout_, k_, stride_, pad_;
    Param w_, b_;
    Tensor x_;
};

/// Normalizes each channel of (N, C, L) over N and L.
class BatchNorm1d : public Layer {
public:
    BatchNorm1d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);
    std::string kind() const override { return "batchnorm1d"; }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& g) override;
    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<Buffer*> buffers() override { return {&mean_, &var_}; }
    void init(Rng&) override;
    /// Freeze running statistics in train mode (used by the gradient check).
    void set_track_stats(bool t) { track_ = t; }

private:
    int c_;
    double momentum_, eps_;
    Param gamma_, beta_;
    Buffer mean_, var_;
    bool track_ = true;
    Tensor xhat_;
    std::vector<double> inv_std_;
    bool last_train_ = false;
};

class LeakyRelu : public Layer {
public:
    explicit LeakyRelu(double slope) : slope_(slope) {}
    std::string kind() const override { return "leaky_relu"; }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& g) override;

private:
    double slope_;
    Tensor x_;
};

/// Size-2 stride-2 max pooling over the last axis, floor mode; ties pick the first.
class MaxPool1d : public Layer {
public:
    std::string kind() const override { return "maxpool1d"; }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& g) override;

private:
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

class Flatten : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& g) override;

private:
    std::vector<int> in_shape_;
};

/// (N, in) -> (N, out)
class Dense : public Layer {
public:
    Dense(std::string name, int in, int out);
    std::string kind() const override { return "dense"; }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& g) override;
    std::vector<Param*> params() override { return {&w_, &b_}; }
    void init(Rng& rng) override;

private:
    int in_, out_;
    Param w_, b_;
    Tensor x_;
};

class Sequential {
public:
    void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
    Tensor forward(const Tensor& x, bool train);
    void backward(const Tensor& grad_out);
    std::vector<Param*> params();
    std::vector<Buffer*> buffers();
    void zero_grad();
    void init(Rng& rng);
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
    std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Row-wise softmax of (N, K) logits.
Tensor softmax(const Tensor& logits);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam step with bias correction; `step` is 1-based. Values and moments
/// are rounded to float32 afterwards so saved models reload bit-exactly.
void adam_update(std::vector<Param*>& params, double lr, long step, const AdamConfig& cfg = {});

}  // namespace rffi::nn
