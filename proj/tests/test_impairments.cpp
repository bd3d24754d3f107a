#include "doctest.h"
#include "rffi/impairments.hpp"
#include "rffi/rng.hpp"
#include "rffi/waveform.hpp"
#include "test_util.hpp"

using namespace rffi;

namespace {

ComplexFrame ramp(std::size_t n) {
    ComplexVec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = {std::cos(0.37 * i) + 0.2, std::sin(0.11 * i * i)};
    return ComplexFrame(x);
}

TransmitterProfile clean_tx() {
    TransmitterProfile t;
    t.cfo_ppm_range = 0.0;
    return t;
}

}  // namespace

TEST_CASE("iq imbalance") {
    const ComplexFrame x = ramp(64);
    CHECK(iq_imbalance(x.samples(), 0.0, 0.0) == x.vec());

    const auto [gi, gq] = iq_branch_gains(1.0);
    CHECK(gi == doctest::Approx(1.059254).epsilon(1e-6));
    CHECK(gq == doctest::Approx(0.944061).epsilon(1e-6));
    CHECK(gi * gq == doctest::Approx(1.0));

    // e^{j pi/4} + j e^{-j pi/4} = sqrt(2) (1 + j).
    const Complex one[1] = {Complex(1, 1)};
    const Complex z = iq_imbalance(one, 0.0, 90.0)[0];
    CHECK(z.real() == doctest::Approx(std::sqrt(2.0)));
    CHECK(z.imag() == doctest::Approx(std::sqrt(2.0)));

    const auto r0 = ReceiverProfile::table()[0];
    CHECK(iq_branch_gains(r0.gain_imbalance_db).first == doctest::Approx(1.004616).epsilon(1e-6));
    CHECK(apply_rx_iq_imbalance(x, ReceiverProfile::ideal()) == x);
}

TEST_CASE("phase imbalance correlates I and Q of a circular input") {
    Rng rng(11);
    ComplexVec x(100000);
    for (auto& v : x) v = rng.cnormal();
    auto corr = [](const ComplexVec& y) {
        double s = 0;
        for (const auto& v : y) s += v.real() * v.imag();
        return s / static_cast<double>(y.size());
    };
    CHECK(std::abs(corr(x)) < 0.01);
    // E[I Q] = sin(theta)/2 for unit-variance circular input at G = 0.
    const double th = 10.0;
    CHECK(corr(iq_imbalance(x, 0.0, th)) == doctest::Approx(0.5 * std::sin(th * kPi / 180.0)).epsilon(0.1));
}

TEST_CASE("saleh amplitude and phase curves") {
    const SalehParams p;
    CHECK(saleh_am(1e-7, p) / 1e-7 == doctest::Approx(2.1587).epsilon(1e-9));
    CHECK(saleh_am(1.0, p) == doctest::Approx(2.1587 / 2.1517).epsilon(1e-9));
    CHECK(saleh_am(1.0, p) == doctest::Approx(1.003253).epsilon(1e-6));
    CHECK(saleh_pm(1.0, p) == doctest::Approx(0.396209).epsilon(1e-6));
    CHECK(saleh_pm(0.0, p) == 0.0);

    TransmitterProfile t = clean_tx();
    t.saleh.alpha2 = 0.0;
    ComplexVec pos(50);
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 0.1 + 0.05 * i;
    const ComplexFrame y = apply_saleh_pa(ComplexFrame(pos), t);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(std::abs(y[i].imag()) < 1e-15);
        CHECK(y[i].real() > 0.0);
    }
    CHECK(y.mean_power() == doctest::Approx(1.0));
}

TEST_CASE("pa compression follows the back-off") {
    // At 15 dB back-off the curve is close to linear; at 0 dB it compresses.
    const ComplexFrame x = generate_stf();
    auto distortion = [&](double ibo) {
        TransmitterProfile t = clean_tx();
        t.saleh.alpha2 = 0.0;
        t.ibo_db = ibo;
        const ComplexFrame y = apply_saleh_pa(x, t);
        double e = 0;
        for (std::size_t i = 0; i < x.size(); ++i) e += std::norm(y[i] - x[i]);
        return e / x.size();
    };
    CHECK(distortion(15.0) < 0.01);
    CHECK(distortion(0.0) > distortion(15.0));
}

TEST_CASE("multipath") {
    const ComplexFrame x = ramp(40);
    LinkRealization real;
    real.tap_coeffs = {1.0};
    const ComplexFrame y = apply_multipath(x, ChannelProfile::cable(), real);
    CHECK(y == x);

    ChannelProfile two{9, {0.0, -6.0}, {0.0, 50.0}, Fading::fixed};
    real.tap_coeffs = {1.0, 0.5};
    const ComplexFrame d = apply_multipath(ComplexFrame(ComplexVec{1.0, 0.0, 0.0}), two, real);
    REQUIRE(d.size() == 4);
    CHECK(d[0] == Complex(1.0));
    CHECK(d[1] == Complex(0.5));
    CHECK(d[2] == Complex(0.0));
    CHECK(d[3] == Complex(0.0));

    const auto h = ChannelProfile::table();
    CHECK(h[0].tap_indices() == std::vector<int>{0, 1, 4});
    CHECK(h[2].tap_indices() == std::vector<int>{0, 1, 3, 5});
    CHECK(h[0].max_delay_samples() == 4);
}

TEST_CASE("rayleigh tap has the configured mean power") {
    ChannelProfile c{9, {0.0}, {0.0}, Fading::rayleigh};
    double s = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += std::norm(draw_channel(c, derive_seed({5, static_cast<std::uint64_t>(i)}))[0]);
    CHECK(s / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rician tap becomes deterministic in magnitude as K grows") {
    ChannelProfile c{9, {0.0, -7.0}, {0.0, 50.0}, Fading::rician, 1e12};
    const double amp0 = std::sqrt(1.0 / (1.0 + std::pow(10.0, -0.7)));
    for (std::uint64_t s = 0; s < 50; ++s) CHECK(std::abs(draw_channel(c, s)[0]) == doctest::Approx(amp0).epsilon(1e-5));
}

TEST_CASE("table channel mean tap powers follow the profile") {
    for (int ch : {0, 1}) {
        const auto c = ChannelProfile::table()[ch];
        std::vector<double> p(3, 0.0);
        const int n = 40000;
        for (int i = 0; i < n; ++i) {
            const auto h = draw_channel(c, derive_seed({77, static_cast<std::uint64_t>(ch), static_cast<std::uint64_t>(i)}));
            for (int k = 0; k < 3; ++k) p[k] += std::norm(h[k]) / n;
        }
        const double tot = 1 + std::pow(10, -0.7) + std::pow(10, -1.3);
        CHECK(p[0] == doctest::Approx(1.0 / tot).epsilon(0.03));
        CHECK(p[1] / p[0] == doctest::Approx(std::pow(10, -0.7)).epsilon(0.05));
        CHECK(p[2] / p[0] == doctest::Approx(std::pow(10, -1.3)).epsilon(0.05));
    }
}

TEST_CASE("cfo and phase rotation") {
    const ComplexFrame x = ramp(32);
    CHECK(apply_cfo_phase(x, 0.0, 0.0) == x);
    CHECK(10e-6 * kCarrierHz == doctest::Approx(57650.0));
    const ComplexFrame y = apply_cfo_phase(ComplexFrame(ComplexVec{1.0}), 0.0, kPi / 2);
    CHECK(std::abs(y[0] - Complex(0, -1)) < 1e-15);
    // Rotation e^{-j 2 pi f n T}.
    const ComplexFrame r = apply_cfo_phase(ComplexFrame(ComplexVec(4, 1.0)), 1e6, 0.0);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(r[n] - std::polar(1.0, -2 * kPi * 1e6 * n / kSampleRateHz)) < 1e-12);
}

TEST_CASE("lna") {
    const ComplexFrame x = ramp(16);
    CHECK(apply_lna(x, ReceiverProfile::ideal()) == x);
    const auto r2 = ReceiverProfile::table()[2];
    CHECK(r2.lna_a3 == -0.055);
    CHECK(std::abs(apply_lna(ComplexFrame(ComplexVec{std::polar(1.0, 0.3)}), r2)[0]) == doctest::Approx(0.945));
    ReceiverProfile r1 = ReceiverProfile::table()[1];
    CHECK(r1.lna_a3 == 0.015);
    CHECK(apply_lna(ComplexFrame(ComplexVec{2.0}), r1)[0].real() == doctest::Approx(2.12));
}

TEST_CASE("awgn") {
    const ComplexFrame x = ramp(100000);
    CHECK(add_awgn(x, kNoNoise, 1) == x);
    const ComplexFrame y = add_awgn(x, 0.0, 3);
    double np = 0;
    for (std::size_t i = 0; i < x.size(); ++i) np += std::norm(y[i] - x[i]);
    CHECK(np / x.size() == doctest::Approx(x.mean_power()).epsilon(0.05));
    CHECK(add_awgn(x, 10.0, 4) == add_awgn(x, 10.0, 4));
    CHECK(add_awgn(x, 10.0, 4) != add_awgn(x, 10.0, 5));
}

TEST_CASE("link at identity settings returns the rotated input") {
    const ComplexFrame x = assemble_frame();
    TransmitterProfile t = clean_tx();
    t.saleh.alpha2 = 0.0;
    t.ibo_db = 80.0;
    const LinkResult r = simulate_link_detailed(x, t, ChannelProfile::cable(), ReceiverProfile::ideal(), kNoNoise, 42);
    REQUIRE(r.frame.size() == x.size());
    CHECK(r.realization.cfo_hz == 0.0);
    const Complex rot = std::polar(1.0, -r.realization.phase_offset_rad);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(r.frame[i] - rot * x[i]) < 1e-6);
}

TEST_CASE("link is deterministic and records its draws") {
    const ComplexFrame x = assemble_frame();
    const auto txs = make_transmitters(3);
    const auto ch = ChannelProfile::table()[2];
    const auto rx = ReceiverProfile::table()[1];
    const LinkResult a = simulate_link_detailed(x, txs[4], ch, rx, 20.0, 99);
    const LinkResult b = simulate_link_detailed(x, txs[4], ch, rx, 20.0, 99);
    CHECK(a.frame == b.frame);
    CHECK(a.frame.size() == x.size() + 5);
    CHECK(a.realization.tap_coeffs.size() == 4);
    CHECK(std::abs(a.realization.cfo_hz) <= 57650.0);
    CHECK(simulate_link(x, txs[4], ch, rx, 20.0, 100) != a.frame);
}

TEST_CASE("stratified transmitter layout") {
    const auto t = make_transmitters(8);
    REQUIRE(t.size() == 12);
    for (const auto& p : t) {
        CHECK(std::abs(p.gain_imbalance_db) >= 0.8);
        CHECK(std::abs(p.gain_imbalance_db) <= 1.0);
        const double th = std::abs(p.phase_imbalance_deg);
        CHECK(((th >= 2.0 && th <= 2.5) || (th >= 6.21 && th <= 7.21) || (th >= 10.92 && th <= 11.42)));
        CHECK(p.saleh.alpha1 == doctest::Approx(2.1587).epsilon(0.051));
    }
    CHECK(make_transmitters(8)[5].phase_imbalance_deg == t[5].phase_imbalance_deg);
    CHECK(make_transmitters(9)[5].phase_imbalance_deg != t[5].phase_imbalance_deg);
    CHECK(make_transmitters(8, 5, TxLayout::independent).size() == 5);
}
