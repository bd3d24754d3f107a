#include "doctest.h"
#include "rffi/dsp_frontend.hpp"
#include "rffi/fft.hpp"
#include "rffi/impairments.hpp"
#include "rffi/rng.hpp"
#include "rffi/waveform.hpp"
#include "test_util.hpp"

using namespace rffi;
using testutil::slice;

namespace {

ComplexFrame noisy_prefixed(std::size_t prefix, double snr_db, std::uint64_t seed) {
    Rng rng(seed);
    ComplexVec x(prefix, Complex(0.0));
    const ComplexFrame f = assemble_frame(true, 1, seed);
    x.insert(x.end(), f.vec().begin(), f.vec().end());
    const double nv = std::pow(10.0, -snr_db / 10.0);
    for (auto& v : x) v += rng.cnormal(nv);
    return ComplexFrame(x);
}

ComplexVec random_spectrum(Rng& rng) {
    ComplexVec s(64);
    for (auto& v : s) v = rng.cnormal() + Complex(0.2, 0.0);
    return s;
}

}  // namespace

TEST_CASE("packet detection") {
    CHECK(detect_packet(assemble_frame(true, 1)) == 0);
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const std::size_t d = detect_packet(noisy_prefixed(77, 20.0, s));
        CHECK(d >= 76);
        CHECK(d <= 78);
    }
    Rng rng(4);
    ComplexVec noise(1000);
    for (auto& v : noise) v = rng.cnormal();
    CHECK_THROWS_AS(detect_packet(ComplexFrame(noise)), NotFound);
    CHECK_THROWS_AS(detect_packet(ComplexFrame(ComplexVec(100, 1.0))), ShapeMismatch);
}

TEST_CASE("ltf cross-correlation fallback finds the preamble") {
    for (std::uint64_t s = 1; s <= 10; ++s) CHECK(locate_ltf_xcorr(noisy_prefixed(33, 5.0, s)) == 33);
}

TEST_CASE("two-step cfo estimation") {
    const ComplexFrame f = assemble_frame();
    const CfoEstimate e = estimate_cfo_detail(apply_cfo_phase(f, 57650.0, 0.4), 0);
    CHECK(e.combined_hz == doctest::Approx(57650.0).epsilon(10.0 / 57650.0));
    // The lag-64 estimate alone aliases at 312.5 kHz; 57.65 kHz is inside its range,
    // a 400 kHz offset is not.
    const CfoEstimate far = estimate_cfo_detail(apply_cfo_phase(f, 400000.0, 0.0), 0);
    CHECK(std::abs(far.fine_hz - 400000.0) > 1e5);
    CHECK(far.combined_hz == doctest::Approx(400000.0).epsilon(1e-6));
    CHECK(estimate_cfo_two_step(apply_cfo_phase(f, -57650.0, 1.0), 0) == doctest::Approx(-57650.0).epsilon(1e-6));
    CHECK(estimate_cfo_two_step(f, 0) == doctest::Approx(0.0));
}

TEST_CASE("cfo estimate is unbiased at 30 dB") {
    const ComplexFrame f = assemble_frame();
    double sum = 0;
    const int n = 400;
    for (int i = 0; i < n; ++i) sum += estimate_cfo_two_step(add_awgn(f, 30.0, static_cast<std::uint64_t>(i)), 0);
    CHECK(std::abs(sum / n) < 50.0);
}

TEST_CASE("cfo correction") {
    const ComplexFrame f = assemble_frame(true, 1);
    CHECK(testutil::max_abs_diff(correct_cfo(apply_cfo_phase(f, 31234.5, 0.0), 31234.5).vec(), f.vec()) < 1e-9);
    CHECK(correct_cfo(f, 0.0) == f);
    const ComplexFrame c = correct_cfo(apply_cfo_phase(f, 31234.5, 0.7), 31234.5);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(c[i] - f[i] * std::polar(1.0, -0.7)) < 1e-9);
}

TEST_CASE("ltf extraction") {
    const ComplexFrame f = assemble_frame(true, 2);
    CHECK(extract_ltf_soi(f, 0).samples == generate_ltf().vec());
    CHECK(extract_ltf_soi(f, 10).samples == slice(f, 170, 330));
    CHECK_THROWS_AS(extract_ltf_soi(ComplexFrame(ComplexVec(300, 1.0)), 0), OutOfBounds);
}

TEST_CASE("ltf denoising") {
    const ComplexVec ltf = generate_ltf().vec();
    const ComplexVec d = denoise_ltf({ltf});
    REQUIRE(d.size() == 64);
    for (int n = 0; n < 64; ++n) CHECK(std::abs(d[n] - 2.0 * ltf[32 + n]) < 1e-12);

    Rng rng(21);
    double in_p = 0, out_p = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        ComplexVec w(160);
        for (auto& v : w) v = rng.cnormal(0.3);
        for (int n = 32; n < 160; ++n) in_p += std::norm(w[n]) / (128.0 * trials);
        for (const auto& v : denoise_ltf({w})) out_p += std::norm(v) / (64.0 * trials);
    }
    CHECK(out_p / in_p == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("64-point spectrum") {
    const ComplexVec ones(64, 1.0);
    const ComplexVec r = spectrum64(ones);
    CHECK(r[0] == Complex(64.0));
    for (int k = 1; k < 64; ++k) CHECK(std::abs(r[k]) < 1e-12);
    ComplexVec delta(64, 0.0);
    delta[0] = 1.0;
    for (const auto& v : spectrum64(delta)) CHECK(std::abs(v - Complex(1.0)) < 1e-15);
    Rng rng(2);
    ComplexVec x(64);
    for (auto& v : x) v = rng.cnormal();
    const ComplexVec s = spectrum64(x);
    double es = 0, ex = 0;
    for (int k = 0; k < 64; ++k) {
        es += std::norm(s[k]);
        ex += std::norm(x[k]);
    }
    CHECK(es == doctest::Approx(64.0 * ex).epsilon(1e-6));
    CHECK(testutil::max_abs_diff(s, testutil::dft(x)) < 1e-9);
}

TEST_CASE("dsq quotients") {
    ComplexVec flat(64, Complex(0.3, -0.8));
    const DsqVector d = compute_dsq(flat);
    REQUIRE(d.quotients.size() == 100);
    for (const auto& q : d.quotients) CHECK(std::abs(q - Complex(1.0)) < 1e-15);

    ComplexVec s(64, 1.0);
    s[PreambleLayout{}.bin(-25)] = Complex(0, 2);
    const DsqVector e = compute_dsq(s);
    CHECK(std::abs(e.quotients[0] - Complex(0, 2)) < 1e-15);
    CHECK(std::abs(e.quotients[1] - Complex(0, -0.5)) < 1e-15);
    CHECK_FALSE(e.degenerate);

    Rng rng(9);
    const ComplexVec r = random_spectrum(rng);
    const Complex g = std::polar(1.0, 1.234);
    ComplexVec rg(64);
    for (int k = 0; k < 64; ++k) rg[k] = g * r[k];
    CHECK(testutil::max_abs_diff(compute_dsq(rg).quotients, compute_dsq(r).quotients) < 1e-12);

    // Oracle: adjacent pairs over the 50 neighbouring active subcarriers.
    std::vector<int> a;
    for (int k = -26; k <= 26; ++k)
        if (k != 0) a.push_back(k);
    const DsqVector dr = compute_dsq(r);
    int j = 0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        if (a[i + 1] != a[i] + 1) continue;
        const Complex lo = r[(a[i] + 64) % 64], hi = r[(a[i + 1] + 64) % 64];
        auto clamp = [](Complex q) { return std::abs(q) > 10.0 ? q * (10.0 / std::abs(q)) : q; };
        CHECK(std::abs(dr.quotients[j++] - clamp(hi / lo)) < 1e-12);
        CHECK(std::abs(dr.quotients[j++] - clamp(lo / hi)) < 1e-12);
    }
    CHECK(j == 100);
}

TEST_CASE("dsq clamps and flags zero bins") {
    ComplexVec s(64, 1.0);
    s[PreambleLayout{}.bin(5)] = 0.0;
    const DsqVector d = compute_dsq(s);
    CHECK(d.degenerate);
    for (const auto& q : d.quotients) CHECK(std::abs(q) <= kDsqClamp + 1e-12);
    ComplexVec t(64, 1.0);
    t[PreambleLayout{}.bin(5)] = 1e-3;
    const DsqVector e = compute_dsq(t);
    CHECK_FALSE(e.degenerate);
    CHECK(e.clamp_count == 2);
}

TEST_CASE("dsq is invariant to global phase and a single complex tap") {
    Rng rng(123);
    const ComplexFrame base = assemble_frame(true, 1);
    for (int i = 0; i < 200; ++i) {
        ComplexVec x = base.vec();
        for (auto& v : x) v += rng.cnormal(0.05);
        const Complex h = rng.cnormal() + Complex(0.01);
        ComplexVec y = x;
        for (auto& v : y) v *= h;
        const DsqVector a = dsq_pipeline(ComplexFrame(x));
        const DsqVector b = dsq_pipeline(ComplexFrame(y));
        CHECK(testutil::max_abs_diff(a.quotients, b.quotients) < 1e-9);
    }
}

TEST_CASE("representations") {
    const ComplexFrame f = simulate_link(assemble_frame(true, 1), make_transmitters(1)[0], ChannelProfile::table()[0],
                                         ReceiverProfile::table()[0], 25.0, 5);
    for (RepKind k : {RepKind::dsq, RepKind::rawiq, RepKind::ciq, RepKind::fft}) {
        const Representation r = build_representation(f, k);
        CHECK(r.length == rep_length(k));
        CHECK(r.values.size() == 2u * r.length);
        double p = 0;
        for (int n = 0; n < r.length; ++n) p += (r.i(n) * r.i(n) + r.q(n) * r.q(n)) / r.length;
        CHECK(p == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(parse_rep_kind(to_string(k)) == k);
    }
    CHECK(rep_length(RepKind::dsq) == 100);
    CHECK(rep_length(RepKind::rawiq) == 128);
    CHECK_THROWS_AS(parse_rep_kind("bogus"), InvalidArgument);

    const Representation raw = build_representation(assemble_frame(), RepKind::rawiq);
    const ComplexVec ltf = generate_ltf().vec();
    const double g = std::sqrt(mean_power(std::span<const Complex>(ltf).subspan(32)));
    for (int n = 0; n < 128; ++n) CHECK(std::abs(Complex(raw.i(n), raw.q(n)) - ltf[32 + n] / g) < 1e-9);
}
