#include "rffi/nn/layers.hpp"

#include <cmath>

#include "rffi/rng.hpp"
#include "rffi/types.hpp"

namespace rffi::nn {

namespace {

void init_uniform(Param& p, double bound, Rng& rng) {
    for (auto& x : p.value.data) x = rng.uniform(-bound, bound);
    snap_to_float(p.value.data);
}

void require_rank(const Tensor& x, int rank, const char* who) {
    if (x.rank() != rank) throw ShapeMismatch(std::string(who) + ": unexpected input shape " + x.shape_str());
}

}  // namespace

Param::Param(std::string n, std::vector<int> shape, bool l2)
    : name(std::move(n)), value(shape), grad(shape), m(shape), v(shape), decay(l2) {}

// ---- Conv1d ----

Conv1d::Conv1d(std::string name, int cin, int cout, int kernel, int stride, int pad)
    : cin_(cin), cout_(cout), k_(kernel), stride_(stride), pad_(pad),
      w_(name + ".weight", {cout, cin, kernel}, true), b_(name + ".bias", {cout}, false) {}

void Conv1d::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin_ * k_));
    init_uniform(w_, bound, rng);
    init_uniform(b_, bound, rng);
}

Tensor Conv1d::forward(const Tensor& x, bool) {
    require_rank(x, 3, "conv1d");
    if (x.dim(1) != cin_) throw ShapeMismatch("conv1d: channel mismatch " + x.shape_str());
    const int n = x.dim(0), l = x.dim(2), lo = out_len(l);
    x_ = x;
    Tensor y({n, cout_, lo});
    const double* w = w_.value.ptr();
    for (int b = 0; b < n; ++b) {
        const double* xb = x.ptr() + static_cast<std::size_t>(b) * cin_ * l;
        double* yb = y.ptr() + static_cast<std::size_t>(b) * cout_ * lo;
        for (int o = 0; o < cout_; ++o) {
            double* yo = yb + static_cast<std::size_t>(o) * lo;
            for (int t = 0; t < lo; ++t) yo[t] = b_.value.data[o];
            for (int c = 0; c < cin_; ++c) {
                const double* xc = xb + static_cast<std::size_t>(c) * l;
                const double* wk = w + (static_cast<std::size_t>(o) * cin_ + c) * k_;
                for (int t = 0; t < lo; ++t) {
                    const int base = t * stride_ - pad_;
                    double acc = 0.0;
                    for (int k = 0; k < k_; ++k) {
                        const int idx = base + k;
                        if (idx >= 0 && idx < l) acc += wk[k] * xc[idx];
                    }
                    yo[t] += acc;
                }
            }
        }
    }
    return y;
}

Tensor Conv1d::backward(const Tensor& g) {
    const int n = x_.dim(0), l = x_.dim(2), lo = out_len(l);
    Tensor gx({n, cin_, l});
    const double* w = w_.value.ptr();
    double* gw = w_.grad.ptr();
    for (int b = 0; b < n; ++b) {
        const double* xb = x_.ptr() + static_cast<std::size_t>(b) * cin_ * l;
        double* gxb = gx.ptr() + static_cast<std::size_t>(b) * cin_ * l;
        const double* gb = g.ptr() + static_cast<std::size_t>(b) * cout_ * lo;
        for (int o = 0; o < cout_; ++o) {
            const double* go = gb + static_cast<std::size_t>(o) * lo;
            double sb = 0.0;
            for (int t = 0; t < lo; ++t) sb += go[t];
            b_.grad.data[o] += sb;
            for (int c = 0; c < cin_; ++c) {
                const double* xc = xb + static_cast<std::size_t>(c) * l;
                double* gxc = gxb + static_cast<std::size_t>(c) * l;
                const std::size_t wo = (static_cast<std::size_t>(o) * cin_ + c) * k_;
                for (int k = 0; k < k_; ++k) {
                    double acc = 0.0;
                    const double wk = w[wo + k];
                    for (int t = 0; t < lo; ++t) {
                        const int idx = t * stride_ - pad_ + k;
                        if (idx >= 0 && idx < l) {
                            acc += go[t] * xc[idx];
                            gxc[idx] += go[t] * wk;
                        }
                    }
                    gw[wo + k] += acc;
                }
            }
        }
    }
    return gx;
}

// ---- BatchNorm1d ----

BatchNorm1d::BatchNorm1d(std::string name, int channels, double momentum, double eps)
    : c_(channels), momentum_(momentum), eps_(eps), gamma_(name + ".gamma", {channels}, false),
      beta_(name + ".beta", {channels}, false), mean_{name + ".running_mean", Tensor({channels})},
      var_{name + ".running_var", Tensor({channels}, 1.0)} {}

void BatchNorm1d::init(Rng&) {
    gamma_.value.fill(1.0);
    beta_.value.fill(0.0);
    mean_.value.fill(0.0);
    var_.value.fill(1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, bool train) {
    require_rank(x, 3, "batchnorm1d");
    if (x.dim(1) != c_) throw ShapeMismatch("batchnorm1d: channel mismatch " + x.shape_str());
    const int n = x.dim(0), l = x.dim(2);
    const double m = static_cast<double>(n) * l;
    xhat_ = Tensor(x.shape);
    inv_std_.assign(c_, 0.0);
    last_train_ = train;
    Tensor y(x.shape);
    for (int c = 0; c < c_; ++c) {
        double mean, var;
        if (train) {
            double s = 0.0;
            for (int b = 0; b < n; ++b)
                for (int t = 0; t < l; ++t) s += x.data[(static_cast<std::size_t>(b) * c_ + c) * l + t];
            mean = s / m;
            double ss = 0.0;
            for (int b = 0; b < n; ++b)
                for (int t = 0; t < l; ++t) {
                    const double d = x.data[(static_cast<std::size_t>(b) * c_ + c) * l + t] - mean;
                    ss += d * d;
                }
            var = ss / m;
            if (track_) {
                const double unbiased = m > 1.0 ? ss / (m - 1.0) : var;
                mean_.value.data[c] = (1.0 - momentum_) * mean_.value.data[c] + momentum_ * mean;
                var_.value.data[c] = (1.0 - momentum_) * var_.value.data[c] + momentum_ * unbiased;
            }
        } else {
            mean = mean_.value.data[c];
            var = var_.value.data[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        const double g = gamma_.value.data[c], be = beta_.value.data[c];
        for (int b = 0; b < n; ++b)
            for (int t = 0; t < l; ++t) {
                const std::size_t i = (static_cast<std::size_t>(b) * c_ + c) * l + t;
                xhat_.data[i] = (x.data[i] - mean) * inv;
                y.data[i] = g * xhat_.data[i] + be;
            }
    }
    if (train && track_) {
        snap_to_float(mean_.value.data);
        snap_to_float(var_.value.data);
    }
    return y;
}

Tensor BatchNorm1d::backward(const Tensor& g) {
    const int n = g.dim(0), l = g.dim(2);
    const double m = static_cast<double>(n) * l;
    Tensor gx(g.shape);
    for (int c = 0; c < c_; ++c) {
        double sg = 0.0, sgx = 0.0;
        for (int b = 0; b < n; ++b)
            for (int t = 0; t < l; ++t) {
                const std::size_t i = (static_cast<std::size_t>(b) * c_ + c) * l + t;
                sg += g.data[i];
                sgx += g.data[i] * xhat_.data[i];
            }
        gamma_.grad.data[c] += sgx;
        beta_.grad.data[c] += sg;
        const double k = gamma_.value.data[c] * inv_std_[c];
        for (int b = 0; b < n; ++b)
            for (int t = 0; t < l; ++t) {
                const std::size_t i = (static_cast<std::size_t>(b) * c_ + c) * l + t;
                gx.data[i] = last_train_ ? k * (g.data[i] - sg / m - xhat_.data[i] * sgx / m) : k * g.data[i];
            }
    }
    return gx;
}

// ---- LeakyRelu ----

Tensor LeakyRelu::forward(const Tensor& x, bool) {
    x_ = x;
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : slope_ * x.data[i];
    return y;
}

Tensor LeakyRelu::backward(const Tensor& g) {
    Tensor gx(g.shape);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] = x_.data[i] > 0.0 ? g.data[i] : slope_ * g.data[i];
    return gx;
}

// ---- MaxPool1d ----

Tensor MaxPool1d::forward(const Tensor& x, bool) {
    require_rank(x, 3, "maxpool1d");
    const int n = x.dim(0), c = x.dim(1), l = x.dim(2), lo = l / 2;
    in_shape_ = x.shape;
    Tensor y({n, c, lo});
    argmax_.assign(y.size(), 0);
    for (int r = 0; r < n * c; ++r) {
        const std::size_t xi = static_cast<std::size_t>(r) * l;
        const std::size_t yi = static_cast<std::size_t>(r) * lo;
        for (int t = 0; t < lo; ++t) {
            const std::size_t a = xi + 2 * t, b = a + 1;
            const std::size_t pick = x.data[b] > x.data[a] ? b : a;
            y.data[yi + t] = x.data[pick];
            argmax_[yi + t] = pick;
        }
    }
    return y;
}

Tensor MaxPool1d::backward(const Tensor& g) {
    Tensor gx(in_shape_);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[argmax_[i]] += g.data[i];
    return gx;
}

// ---- Flatten ----

Tensor Flatten::forward(const Tensor& x, bool) {
    in_shape_ = x.shape;
    Tensor y = x;
    y.shape = {x.dim(0), static_cast<int>(x.size() / static_cast<std::size_t>(x.dim(0)))};
    return y;
}

Tensor Flatten::backward(const Tensor& g) {
    Tensor gx = g;
    gx.shape = in_shape_;
    return gx;
}

// ---- Dense ----

Dense::Dense(std::string name, int in, int out)
    : in_(in), out_(out), w_(name + ".weight", {out, in}, true), b_(name + ".bias", {out}, false) {}

void Dense::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    init_uniform(w_, bound, rng);
    init_uniform(b_, bound, rng);
}

Tensor Dense::forward(const Tensor& x, bool) {
    require_rank(x, 2, "dense");
    if (x.dim(1) != in_) throw ShapeMismatch("dense: feature mismatch " + x.shape_str());
    x_ = x;
    const int n = x.dim(0);
    Tensor y({n, out_});
    for (int b = 0; b < n; ++b) {
        const double* xb = x.ptr() + static_cast<std::size_t>(b) * in_;
        for (int o = 0; o < out_; ++o) {
            const double* wo = w_.value.ptr() + static_cast<std::size_t>(o) * in_;
            double acc = b_.value.data[o];
            for (int i = 0; i < in_; ++i) acc += wo[i] * xb[i];
            y.data[static_cast<std::size_t>(b) * out_ + o] = acc;
        }
    }
    return y;
}

Tensor Dense::backward(const Tensor& g) {
    const int n = x_.dim(0);
    Tensor gx({n, in_});
    for (int b = 0; b < n; ++b) {
        const double* xb = x_.ptr() + static_cast<std::size_t>(b) * in_;
        double* gxb = gx.ptr() + static_cast<std::size_t>(b) * in_;
        for (int o = 0; o < out_; ++o) {
            const double go = g.data[static_cast<std::size_t>(b) * out_ + o];
            b_.grad.data[o] += go;
            double* gw = w_.grad.ptr() + static_cast<std::size_t>(o) * in_;
            const double* wo = w_.value.ptr() + static_cast<std::size_t>(o) * in_;
            for (int i = 0; i < in_; ++i) {
                gw[i] += go * xb[i];
                gxb[i] += go * wo[i];
            }
        }
    }
    return gx;
}

// ---- Sequential ----

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, train);
    return h;
}

void Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

std::vector<Param*> Sequential::params() {
    std::vector<Param*> out;
    for (auto& l : layers_)
        for (auto* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Buffer*> Sequential::buffers() {
    std::vector<Buffer*> out;
    for (auto& l : layers_)
        for (auto* b : l->buffers()) out.push_back(b);
    return out;
}

void Sequential::zero_grad() {
    for (auto* p : params()) p->grad.fill(0.0);
}

void Sequential::init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
}

Tensor softmax(const Tensor& logits) {
    const int n = logits.dim(0), k = logits.dim(1);
    Tensor p(logits.shape);
    for (int b = 0; b < n; ++b) {
        const double* z = logits.ptr() + static_cast<std::size_t>(b) * k;
        double* pb = p.ptr() + static_cast<std::size_t>(b) * k;
        double mx = z[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, z[j]);
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += (pb[j] = std::exp(z[j] - mx));
        for (int j = 0; j < k; ++j) pb[j] /= s;
    }
    return p;
}

void adam_update(std::vector<Param*>& params, double lr, long step, const AdamConfig& cfg) {
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (auto* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = p->m.data[i];
            double& v = p->v.data[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            const double mh = m / c1, vh = v / c2;
            p->value.data[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
        }
        snap_to_float(p->value.data);
        snap_to_float(p->m.data);
        snap_to_float(p->v.data);
        if (!p->value.all_finite()) throw Error("non-finite parameter after update: " + p->name);
    }
}

}  // namespace rffi::nn
