#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "rffi/harness/dataset.hpp"
#include "rffi/neural.hpp"
#include "rffi/rng.hpp"

using namespace rffi;
using nn::Tensor;

namespace {

Tensor random_batch(std::vector<int> shape, std::uint64_t seed) {
    Tensor t(shape);
    Rng rng(seed);
    for (auto& v : t.data) v = rng.normal();
    return t;
}

// Two classes: +pattern and -pattern with noise.
ClassifierData separable(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> pat(200);
    for (int i = 0; i < 200; ++i) pat[i] = std::sin(0.2 * i) + 0.3 * std::cos(0.05 * i * i);
    ClassifierData d;
    d.x = Tensor({2 * per_class, 2, 100});
    for (int n = 0; n < 2 * per_class; ++n) {
        const int y = n % 2;
        d.labels.push_back(y);
        for (int i = 0; i < 200; ++i) d.x.data[n * 200 + i] = (y ? -pat[i] : pat[i]) + 0.3 * rng.normal();
    }
    return d;
}

ClassifierConfig small_classifier() {
    ClassifierConfig c;
    c.conv_filters = {4, 6, 8};
    c.classes = 2;
    c.epochs = 100;
    c.batch = 16;
    return c;
}

double max_param_diff(ModelState& a, ModelState& b) {
    auto pa = a.net.params(), pb = b.net.params();
    double m = 0;
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t j = 0; j < pa[i]->value.size(); ++j)
            m = std::max(m, std::abs(pa[i]->value.data[j] - pb[i]->value.data[j]));
    return m;
}

}  // namespace

TEST_CASE("dsqcnn block lengths and flattened size") {
    // Conv: floor((L + 2p - k)/s) + 1, pool halves with floor.
    auto conv = [](int l) { return (l + 2 - 3) / 2 + 1; };
    std::vector<int> lens = {100};
    for (int b = 0; b < 3; ++b) {
        lens.push_back(conv(lens.back()));
        lens.push_back(lens.back() / 2);
    }
    CHECK(lens == std::vector<int>{100, 50, 25, 13, 6, 3, 1});

    ClassifierConfig c;
    CHECK(c.flat_features() == 128);
    c.input_len = 128;
    CHECK(c.flat_features() == 256);

    ModelState m = build_dsqcnn(ClassifierConfig{}, 1);
    Tensor x = random_batch({3, 2, 100}, 2);
    std::vector<int> seen;
    for (auto& l : m.net.layers()) {
        x = l->forward(x, false);
        if (l->kind() == "maxpool1d" || l->kind() == "conv1d") seen.push_back(x.dim(2));
    }
    CHECK(seen == std::vector<int>{50, 25, 13, 6, 3, 1});
    CHECK(x.shape == std::vector<int>{3, 12});
}

TEST_CASE("initialization is seeded") {
    ModelState a = build_dsqcnn(ClassifierConfig{}, 5);
    ModelState b = build_dsqcnn(ClassifierConfig{}, 5);
    ModelState c = build_dsqcnn(ClassifierConfig{}, 6);
    CHECK(max_param_diff(a, b) == 0.0);
    CHECK(max_param_diff(a, c) > 0.0);
    // Kaiming-uniform bound 1/sqrt(fan_in).
    for (auto* p : a.net.params()) {
        if (p->value.rank() < 2) continue;
        const int fan_in = static_cast<int>(p->value.size()) / p->value.dim(0);
        for (double v : p->value.data) CHECK(std::abs(v) <= (1.0 + 1e-6) / std::sqrt(fan_in));
    }
}

TEST_CASE("classifier forward") {
    ModelState m = build_dsqcnn(ClassifierConfig{}, 3);
    const Tensor x = random_batch({5, 2, 100}, 4);
    const Tensor p = classifier_forward(m, x, Mode::eval);
    for (int n = 0; n < 5; ++n) {
        double s = 0;
        for (int k = 0; k < 12; ++k) s += p.data[n * 12 + k];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(classifier_forward(m, x, Mode::eval).data == p.data);
    CHECK_THROWS_AS(classifier_forward(m, random_batch({5, 2, 90}, 4), Mode::eval), ShapeMismatch);

    m.zero_parameters();
    const Tensor u = classifier_forward(m, x, Mode::eval);
    for (double v : u.data) CHECK(v == doctest::Approx(1.0 / 12.0));
}

TEST_CASE("softmax is stable for large logits") {
    Tensor l({1, 3});
    l.data = {1000.0, 1000.0, -1000.0};
    const Tensor s = nn::softmax(l);
    CHECK(s.data[0] == doctest::Approx(0.5));
    CHECK(s.data[2] == doctest::Approx(0.0));
}

TEST_CASE("argmax tie rule") {
    std::vector<double> p(12, 0.0);
    p[0] = 0.1;
    p[1] = 0.8;
    p[2] = 0.1;
    CHECK(argmax_first(p) == 1);
    std::vector<double> t = {0.4, 0.1, 0.1, 0.4};
    CHECK(argmax_first(t) == 0);
    CHECK_THROWS_AS(argmax_first(std::vector<double>{}), EmptyInput);
}

TEST_CASE("training separates two synthetic classes") {
    const ClassifierData d = separable(20, 8);
    ClassifierConfig c = small_classifier();
    ModelState m = build_dsqcnn(c, 9);
    train_classifier(m, d, c);
    CHECK(accuracy(m, d) == 1.0);
    CHECK(m.loss_history.size() == 100);
    CHECK(m.loss_history.back() < m.loss_history.front());
    Representation r{RepKind::dsq, 100, std::vector<double>(d.x.data.begin() + 200, d.x.data.begin() + 400)};
    CHECK(predict_label(m, r) == d.labels[1]);
}

TEST_CASE("l2 penalty changes the solution") {
    const ClassifierData d = separable(10, 8);
    ClassifierConfig c = small_classifier();
    c.epochs = 5;
    ModelState a = build_dsqcnn(c, 9), b = build_dsqcnn(c, 9);
    c.l2_strength = 0.0;
    train_classifier(a, d, c);
    c.l2_strength = 0.001;
    train_classifier(b, d, c);
    CHECK(max_param_diff(a, b) > 0.0);
}

TEST_CASE("training is reproducible") {
    const ClassifierData d = separable(10, 8);
    ClassifierConfig c = small_classifier();
    c.epochs = 3;
    ModelState a = build_dsqcnn(c, 9), b = build_dsqcnn(c, 9);
    train_classifier(a, d, c);
    train_classifier(b, d, c);
    CHECK(max_param_diff(a, b) == 0.0);
    CHECK(a.loss_history == b.loss_history);
}

TEST_CASE("loss falls over the first epochs on the 30 dB training set") {
    harness::ExperimentConfig cfg;
    const auto d = harness::generate_dataset(cfg.receivers[0], cfg.channels[0], cfg);
    const double snr = 30.0;
    const auto idx = d.select(harness::Split::train, &snr);
    std::vector<Representation> reps;
    std::vector<int> labels;
    for (auto i : idx) {
        reps.push_back(build_representation(d.frames[i], RepKind::dsq));
        labels.push_back(d.records[i].tx);
    }
    ClassifierConfig c;
    c.epochs = 5;
    ModelState m = build_dsqcnn(c, 21);
    train_classifier(m, make_classifier_data(reps, labels), c);
    for (std::size_t e = 1; e < m.loss_history.size(); ++e) CHECK(m.loss_history[e] < m.loss_history[e - 1]);
}

TEST_CASE("tcnn shape and parameter count") {
    ModelState t = build_tcnn(TcnnConfig{}, 1);
    CHECK(t.parameter_count() == 6 * 40 + 40 + 40 * 40 + 40 + 40 * 40 + 40 + 40 * 2 + 2);
    CHECK(t.parameter_count() == 3642);
    ModelState u = build_tcnn(TcnnConfig{}, 1);
    CHECK(max_param_diff(t, u) == 0.0);
    t.zero_parameters();
    const ComplexFrame f(ComplexVec{Complex(1, 2), Complex(-3, 0.5), Complex(0.1, 0.1)});
    const ComplexFrame out = calibrate_sequence(t, f);
    CHECK(out.size() == f.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == Complex(0.0));
}

TEST_CASE("augmented input") {
    const auto z = augment_input(0.0);
    for (double v : z) CHECK(v == 0.0);
    CHECK(augment_input(Complex(3, 4)) == std::array<double, 6>{3, 4, 5, 25, 125, 625});
    CHECK(augment_input(1.0) == std::array<double, 6>{1, 0, 1, 1, 1, 1});
}

namespace {

CalibrationDataset cubic_fixture(int frames, std::uint64_t seed) {
    Rng rng(seed);
    CalibrationDataset d;
    for (int f = 0; f < frames; ++f) {
        ComplexVec x(320), y(320);
        for (int n = 0; n < 320; ++n) {
            x[n] = rng.cnormal(0.5);
            y[n] = x[n] - 0.1 * x[n] * std::norm(x[n]);
        }
        d.sources.emplace_back(x);
        d.targets.emplace_back(y);
    }
    return d;
}

}  // namespace

TEST_CASE("tcnn learns to undo a cubic distortion") {
    const CalibrationDataset train = cubic_fixture(40, 1);
    const CalibrationDataset test = cubic_fixture(10, 2);
    TcnnConfig c;
    c.lr = 1e-3;
    c.epochs = 150;
    c.batch = 256;
    ModelState m = build_tcnn(c, 3);
    auto nmse = [&]() {
        std::vector<ComplexFrame> mapped;
        for (const auto& f : test.targets) mapped.push_back(calibrate_sequence(m, f));
        return compute_nmse(mapped, test.sources);
    };
    const double before = nmse();
    train_tcnn(m, train, c);
    const double after = nmse();
    CHECK(after <= before);
    CHECK(after < -30.0);
    MESSAGE("cubic fixture NMSE " << before << " dB -> " << after << " dB");
}

TEST_CASE("gradient check") {
    ClassifierConfig c;
    c.conv_filters = {4, 6, 8};
    ModelState m = build_dsqcnn(c, 17);
    const Tensor x = random_batch({4, 2, 100}, 5);
    Tensor y({4});
    y.data = {0, 3, 7, 11};
    const GradientCheck gc = gradient_check_detail(m, x, y);
    const double ec = gc.max_relative;
    CHECK(ec < 1e-4);
    CHECK(gc.max_absolute < 1e-8);
    CHECK(gradient_check(m, x, y) == ec);

    ModelState t = build_tcnn(TcnnConfig{}, 18);
    const Tensor tx = random_batch({16, 6}, 6);
    const Tensor ty = random_batch({16, 2}, 7);
    const GradientCheck gt = gradient_check_detail(t, tx, ty);
    const double et = gt.max_relative;
    CHECK(et < 1e-5);
    CHECK(gt.max_absolute < 1e-9);
    MESSAGE("gradient check: dsqcnn " << ec << " (abs " << gc.max_absolute << "), tcnn " << et << " (abs "
                                      << gt.max_absolute << ")");

    const double ez = gradient_check(t, Tensor({16, 6}), Tensor({16, 2}));
    CHECK(std::isfinite(ez));
    CHECK(ez < 1e-5);
}

TEST_CASE("model files round-trip exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "rffi_model_io";
    std::filesystem::create_directories(dir);
    const ClassifierData d = separable(10, 8);
    ClassifierConfig c = small_classifier();
    c.epochs = 3;
    ModelState m = build_dsqcnn(c, 9);
    m.representation = "ciq";
    train_classifier(m, d, c);
    save_model(m, (dir / "m.bin").string());
    ModelState r = load_model((dir / "m.bin").string());
    CHECK(r.representation == "ciq");
    CHECK(r.epoch == m.epoch);
    CHECK(r.adam_step == m.adam_step);
    CHECK(r.loss_history == m.loss_history);
    CHECK(max_param_diff(m, r) == 0.0);
    auto bm = m.net.buffers(), br = r.net.buffers();
    REQUIRE(bm.size() == br.size());
    for (std::size_t i = 0; i < bm.size(); ++i) CHECK(bm[i]->value.data == br[i]->value.data);
    CHECK(classifier_forward(m, d.x, Mode::eval).data == classifier_forward(r, d.x, Mode::eval).data);

    ModelState t = build_tcnn(TcnnConfig{}, 4);
    save_model(t, (dir / "t.bin").string());
    ModelState tr = load_model((dir / "t.bin").string());
    CHECK(tr.kind == ModelKind::tcnn);
    CHECK(max_param_diff(t, tr) == 0.0);

    {
        std::ofstream f(dir / "bad.bin", std::ios::binary);
        f << "NOTAMODEL";
    }
    CHECK_THROWS_AS(load_model((dir / "bad.bin").string()), FormatError);
    CHECK_THROWS_AS(load_model((dir / "missing.bin").string()), IoError);
    std::filesystem::remove_all(dir);
}
