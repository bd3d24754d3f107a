#include "rffi/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rffi/rng.hpp"

namespace rffi {

using nn::Tensor;

void ClassifierConfig::validate() const {
    if (classes < 2) throw InvalidArgument("classifier needs at least 2 classes");
    if (stride != 2 || padding != 1) throw InvalidArgument("classifier stride/padding are fixed at 2/1");
    if (conv_filters.size() != 3) throw InvalidArgument("classifier needs three conv blocks");
    if (input_len <= 0 || epochs < 0 || batch <= 0) throw InvalidArgument("bad classifier config");
    if (flat_features() <= 0) throw InvalidArgument("input too short for three conv/pool blocks");
}

int ClassifierConfig::flat_features() const {
    int l = input_len;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) {
        l = (l + 2 * padding - kernel) / stride + 1;
        l = l / pool;
    }
    return conv_filters.back() * l;
}

void TcnnConfig::validate() const {
    if (input_dim != 6) throw InvalidArgument("TCNN input_dim must be 2 + 4");
    if (output_dim != 2 || hidden.empty() || epochs < 0 || batch <= 0) throw InvalidArgument("bad TCNN config");
}

std::string to_string(ModelKind k) { return k == ModelKind::dsqcnn ? "dsqcnn" : "tcnn"; }

namespace {

void add_dsqcnn_layers(nn::Sequential& net, const ClassifierConfig& c) {
    int cin = 2;
    for (std::size_t i = 0; i < c.conv_filters.size(); ++i) {
        const std::string b = "block" + std::to_string(i + 1);
        net.add(std::make_unique<nn::Conv1d>(b + ".conv", cin, c.conv_filters[i], c.kernel, c.stride, c.padding));
        net.add(std::make_unique<nn::BatchNorm1d>(b + ".bn", c.conv_filters[i]));
        net.add(std::make_unique<nn::LeakyRelu>(c.leaky_slope));
        net.add(std::make_unique<nn::MaxPool1d>());
        cin = c.conv_filters[i];
    }
    net.add(std::make_unique<nn::Flatten>());
    net.add(std::make_unique<nn::Dense>("dense", c.flat_features(), c.classes));
}

void add_tcnn_layers(nn::Sequential& net, const TcnnConfig& c) {
    int in = c.input_dim;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
        net.add(std::make_unique<nn::Dense>("fc" + std::to_string(i + 1), in, c.hidden[i]));
        net.add(std::make_unique<nn::LeakyRelu>(c.leaky_slope));
        in = c.hidden[i];
    }
    net.add(std::make_unique<nn::Dense>("out", in, c.output_dim));
}

void set_bn_tracking(nn::Sequential& net, bool on) {
    for (auto& l : net.layers())
        if (auto* bn = dynamic_cast<nn::BatchNorm1d*>(l.get())) bn->set_track_stats(on);
}

double lr_at(const ClassifierConfig& c, int epoch) {
    return c.lr * std::pow(c.lr_decay_factor, static_cast<double>(epoch / c.lr_decay_every));
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
    const std::size_t row = x.size() / static_cast<std::size_t>(x.dim(0));
    std::vector<int> shape = x.shape;
    shape[0] = static_cast<int>(end - begin);
    Tensor out(shape);
    for (std::size_t i = begin; i < end; ++i)
        std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * row), row,
                    out.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * row));
    return out;
}

// Cross-entropy (mean) plus l2 penalty; optionally leaves gradients in the params.
double classifier_objective(ModelState& m, const Tensor& x, const std::vector<int>& labels, double l2,
                            bool with_grad) {
    const Tensor logits = m.net.forward(x, true);
    const Tensor p = nn::softmax(logits);
    const int n = p.dim(0), k = p.dim(1);
    double ce = 0.0;
    Tensor g(p.shape);
    for (int b = 0; b < n; ++b) {
        const int y = labels[static_cast<std::size_t>(b)];
        if (y < 0 || y >= k) throw LabelOutOfRange("label out of range");
        const double py = p.data[static_cast<std::size_t>(b) * k + y];
        ce -= std::log(std::max(py, 1e-300));
        for (int j = 0; j < k; ++j)
            g.data[static_cast<std::size_t>(b) * k + j] =
                (p.data[static_cast<std::size_t>(b) * k + j] - (j == y ? 1.0 : 0.0)) / n;
    }
    ce /= n;
    double pen = 0.0;
    for (auto* prm : m.net.params())
        if (prm->decay)
            for (double w : prm->value.data) pen += w * w;
    if (with_grad) {
        m.net.zero_grad();
        m.net.backward(g);
        for (auto* prm : m.net.params())
            if (prm->decay)
                for (std::size_t i = 0; i < prm->value.size(); ++i) prm->grad.data[i] += 2.0 * l2 * prm->value.data[i];
    }
    return ce + l2 * pen;
}

double tcnn_objective(ModelState& m, const Tensor& x, const Tensor& y, bool with_grad) {
    const Tensor out = m.net.forward(x, true);
    const int n = out.dim(0);
    double loss = 0.0;
    Tensor g(out.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out.data[i] - y.data[i];
        loss += d * d;
        g.data[i] = d / n;
    }
    if (with_grad) {
        m.net.zero_grad();
        m.net.backward(g);
    }
    return loss / (2.0 * n);
}

}  // namespace

ModelState build_dsqcnn(const ClassifierConfig& config, std::uint64_t seed) {
    config.validate();
    ModelState m;
    m.kind = ModelKind::dsqcnn;
    m.classifier = config;
    m.seed = seed;
    add_dsqcnn_layers(m.net, config);
    Rng rng(derive_seed({seed, 0xc1a5}));
    m.net.init(rng);
    return m;
}

ModelState build_tcnn(const TcnnConfig& config, std::uint64_t seed) {
    config.validate();
    ModelState m;
    m.kind = ModelKind::tcnn;
    m.tcnn = config;
    m.seed = seed;
    add_tcnn_layers(m.net, config);
    Rng rng(derive_seed({seed, 0x7c22}));
    m.net.init(rng);
    return m;
}

ModelState ModelState::clone() const {
    ModelState c;
    c.kind = kind;
    c.classifier = classifier;
    c.tcnn = tcnn;
    c.representation = representation;
    c.seed = seed;
    c.epoch = epoch;
    c.adam_step = adam_step;
    c.loss_history = loss_history;
    c.val_history = val_history;
    c.best_epoch = best_epoch;
    if (kind == ModelKind::dsqcnn)
        add_dsqcnn_layers(c.net, classifier);
    else
        add_tcnn_layers(c.net, tcnn);
    c.copy_weights_from(*this);
    return c;
}

void ModelState::copy_weights_from(const ModelState& other) {
    auto& src = const_cast<nn::Sequential&>(other.net);
    auto sp = src.params();
    auto dp = net.params();
    auto sb = src.buffers();
    auto db = net.buffers();
    if (sp.size() != dp.size() || sb.size() != db.size()) throw ShapeMismatch("architectures differ");
    for (std::size_t i = 0; i < sp.size(); ++i) {
        if (sp[i]->value.shape != dp[i]->value.shape) throw ShapeMismatch("parameter shapes differ");
        dp[i]->value = sp[i]->value;
        dp[i]->m = sp[i]->m;
        dp[i]->v = sp[i]->v;
    }
    for (std::size_t i = 0; i < sb.size(); ++i) db[i]->value = sb[i]->value;
}

std::size_t ModelState::parameter_count() {
    std::size_t n = 0;
    for (auto* p : net.params()) n += p->value.size();
    return n;
}

void ModelState::zero_parameters() {
    for (auto* p : net.params()) p->value.fill(0.0);
}

Tensor classifier_forward(ModelState& model, const Tensor& batch, Mode mode) {
    if (model.kind != ModelKind::dsqcnn) throw InvalidArgument("not a classifier model");
    if (batch.rank() != 3 || batch.dim(1) != 2 || batch.dim(2) != model.classifier.input_len)
        throw ShapeMismatch("classifier expects (N, 2, " + std::to_string(model.classifier.input_len) + "), got " +
                            batch.shape_str());
    if (mode == Mode::train) return nn::softmax(model.net.forward(batch, true));
    return nn::softmax(model.net.forward(batch, false));
}

ClassifierData make_classifier_data(const std::vector<Representation>& reps, const std::vector<int>& labels) {
    if (reps.size() != labels.size()) throw ShapeMismatch("representation and label counts differ");
    ClassifierData d;
    if (reps.empty()) return d;
    const int l = reps.front().length;
    d.x = Tensor({static_cast<int>(reps.size()), 2, l});
    for (std::size_t i = 0; i < reps.size(); ++i) {
        if (reps[i].length != l) throw ShapeMismatch("mixed representation lengths");
        std::copy(reps[i].values.begin(), reps[i].values.end(),
                  d.x.data.begin() + static_cast<std::ptrdiff_t>(i * 2 * l));
    }
    d.labels = labels;
    return d;
}

double classifier_loss(ModelState& model, const ClassifierData& data, double l2_strength) {
    return classifier_objective(model, data.x, data.labels, l2_strength, false);
}

ModelState& train_classifier(ModelState& model, const ClassifierData& data, const ClassifierConfig& config,
                             const ClassifierTrainOptions& opts) {
    if (data.size() == 0) throw EmptyDataset("no training records");
    if (model.kind != ModelKind::dsqcnn) throw InvalidArgument("not a classifier model");
    config.validate();
    if (data.x.dim(2) != model.classifier.input_len) throw ShapeMismatch("training data length mismatch");
    for (int y : data.labels)
        if (y < 0 || y >= model.classifier.classes) throw LabelOutOfRange("label out of range");

    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    auto params = model.net.params();
    ModelState best;
    double best_acc = -1.0;
    for (int e = 0; e < config.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed({opts.shuffle_seed, static_cast<std::uint64_t>(model.epoch)}));
        rng.shuffle(order.begin(), order.end());
        const double lr = lr_at(config, model.epoch);
        double total = 0.0;
        std::size_t seen = 0;
        for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(config.batch)) {
            const std::size_t end = std::min(n, b + static_cast<std::size_t>(config.batch));
            // A single-sample batch has no batch statistics.
            if (end - b < 2 && n > 1) break;
            const Tensor x = gather_rows(data.x, order, b, end);
            std::vector<int> y(end - b);
            for (std::size_t i = b; i < end; ++i) y[i - b] = data.labels[order[i]];
            const double loss = classifier_objective(model, x, y, config.l2_strength, true);
            ++model.adam_step;
            nn::adam_update(params, lr, model.adam_step);
            total += loss * static_cast<double>(end - b);
            seen += end - b;
        }
        const double mean_loss = total / static_cast<double>(seen);
        model.loss_history.push_back(mean_loss);
        ++model.epoch;
        if (opts.validation) {
            const double acc = accuracy(model, *opts.validation);
            model.val_history.push_back(acc);
            if (acc > best_acc) {
                best_acc = acc;
                model.best_epoch = model.epoch;
                best = model.clone();
            }
        }
        if (opts.on_epoch) opts.on_epoch(model.epoch, mean_loss);
    }
    if (opts.validation && best_acc >= 0.0) model.copy_weights_from(best);
    return model;
}

int argmax_first(std::span<const double> v) {
    if (v.empty()) throw EmptyInput("argmax of an empty vector");
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

std::vector<int> predict_labels(ModelState& model, const Tensor& x) {
    std::vector<int> out;
    if (x.rank() == 0 || x.dim(0) == 0) return out;
    const int n = x.dim(0);
    const int chunk = 512;
    std::vector<std::size_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (int b = 0; b < n; b += chunk) {
        const int end = std::min(n, b + chunk);
        const Tensor p = classifier_forward(model, gather_rows(x, idx, b, end), Mode::eval);
        const int k = p.dim(1);
        for (int i = 0; i < end - b; ++i)
            out.push_back(argmax_first(std::span<const double>(p.data).subspan(static_cast<std::size_t>(i) * k, k)));
    }
    return out;
}

int predict_label(ModelState& model, const Representation& rep) {
    Tensor x({1, 2, rep.length});
    x.data = rep.values;
    return predict_labels(model, x).front();
}

double accuracy(ModelState& model, const ClassifierData& data) {
    if (data.size() == 0) throw EmptyInput("accuracy of an empty set");
    const auto pred = predict_labels(model, data.x);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == data.labels[i];
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

std::array<double, 6> augment_input(Complex x) {
    const double a = std::abs(x);
    return {x.real(), x.imag(), a, a * a, a * a * a, a * a * a * a};
}

ModelState& train_tcnn(ModelState& model, const CalibrationDataset& pairs, const TcnnConfig& config,
                       const TcnnTrainOptions& opts) {
    if (model.kind != ModelKind::tcnn) throw InvalidArgument("not a TCNN model");
    config.validate();
    std::size_t n = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs.targets[i].size() != pairs.sources[i].size()) throw ShapeMismatch("pair lengths differ");
        n += pairs.targets[i].size();
    }
    if (n == 0) throw EmptyDataset("no calibration pairs");
    Tensor x({static_cast<int>(n), 6});
    Tensor y({static_cast<int>(n), 2});
    std::size_t r = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t j = 0; j < pairs.targets[i].size(); ++j, ++r) {
            const auto a = augment_input(pairs.targets[i][j]);
            std::copy(a.begin(), a.end(), x.data.begin() + static_cast<std::ptrdiff_t>(r * 6));
            y.data[r * 2] = pairs.sources[i][j].real();
            y.data[r * 2 + 1] = pairs.sources[i][j].imag();
        }
    std::vector<std::size_t> order(n);
    auto params = model.net.params();
    for (int e = 0; e < config.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed({opts.shuffle_seed, static_cast<std::uint64_t>(model.epoch)}));
        rng.shuffle(order.begin(), order.end());
        double total = 0.0;
        for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(config.batch)) {
            const std::size_t end = std::min(n, b + static_cast<std::size_t>(config.batch));
            const double loss = tcnn_objective(model, gather_rows(x, order, b, end), gather_rows(y, order, b, end), true);
            ++model.adam_step;
            nn::adam_update(params, config.lr, model.adam_step);
            total += loss * static_cast<double>(end - b);
        }
        model.loss_history.push_back(total / static_cast<double>(n));
        ++model.epoch;
        if (opts.on_epoch) opts.on_epoch(model.epoch, model.loss_history.back());
    }
    return model;
}

ComplexFrame calibrate_sequence(ModelState& model, const ComplexFrame& frame) {
    if (model.kind != ModelKind::tcnn) throw InvalidArgument("not a TCNN model");
    const int n = static_cast<int>(frame.size());
    Tensor x({n, 6});
    for (int i = 0; i < n; ++i) {
        const auto a = augment_input(frame[static_cast<std::size_t>(i)]);
        std::copy(a.begin(), a.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i) * 6);
    }
    const Tensor out = model.net.forward(x, false);
    ComplexVec s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = {out.data[2 * i], out.data[2 * i + 1]};
    return frame.with_samples(std::move(s), FrameOrigin::calibrated);
}

double model_loss(ModelState& model, const Tensor& batch, const Tensor& labels, bool with_grad) {
    if (model.kind == ModelKind::dsqcnn) {
        std::vector<int> y(labels.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(labels.data[i]);
        return classifier_objective(model, batch, y, model.classifier.l2_strength, with_grad);
    }
    if (batch.rank() != 2 || batch.dim(1) != 6 || labels.size() != static_cast<std::size_t>(batch.dim(0)) * 2)
        throw ShapeMismatch("TCNN loss expects (N, 6) inputs and (N, 2) targets");
    return tcnn_objective(model, batch, labels, with_grad);
}

GradientCheck gradient_check_detail(ModelState& model, const Tensor& batch, const Tensor& labels, double step) {
    set_bn_tracking(model.net, false);
    model_loss(model, batch, labels, true);
    auto params = model.net.params();
    std::vector<std::vector<double>> analytic;
    for (auto* p : params) analytic.push_back(p->grad.data);
    GradientCheck r;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = params[k]->value.data;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double orig = v[i];
            v[i] = orig + step;
            const double lp = model_loss(model, batch, labels, false);
            v[i] = orig - step;
            const double lm = model_loss(model, batch, labels, false);
            v[i] = orig;
            const double num = (lp - lm) / (2.0 * step);
            const double a = analytic[k][i];
            const double den = std::max({std::abs(a), std::abs(num), kGradientFloor});
            r.max_relative = std::max(r.max_relative, std::abs(a - num) / den);
            r.max_absolute = std::max(r.max_absolute, std::abs(a - num));
        }
    }
    set_bn_tracking(model.net, true);
    return r;
}

double gradient_check(ModelState& model, const Tensor& batch, const Tensor& labels, double step) {
    return gradient_check_detail(model, batch, labels, step).max_relative;
}

}  // namespace rffi
