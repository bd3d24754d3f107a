#include "rffi/impairments.hpp"

#include <cmath>

#include "rffi/rng.hpp"

namespace rffi {

namespace {

constexpr double kDeg = kPi / 180.0;

// Sub-stream tags for simulate_link.
enum : std::uint64_t { kTagChannel = 1, kTagRotation = 2, kTagNoise = 3 };

}  // namespace

void TransmitterProfile::validate() const {
    if (!(saleh.beta1 > 0.0) || !(saleh.beta2 > 0.0)) throw InvalidArgument("Saleh beta must be positive");
    if (!(cfo_ppm_range >= 0.0)) throw InvalidArgument("cfo_ppm_range must be non-negative");
}

void ReceiverProfile::validate() const {
    if (lna_a1 == 0.0) throw InvalidArgument("lna_a1 must be nonzero");
}

std::vector<ReceiverProfile> ReceiverProfile::table() {
    return {
        {0, 0.08, 2.31, 1.0, -0.005},
        {1, 0.45, -6.88, 1.0, 0.015},
        {2, -0.75, -10.88, 1.0, -0.055},
    };
}

void ChannelProfile::validate() const {
    if (avg_path_gains_db.empty() || avg_path_gains_db.size() != delays_ns.size())
        throw InvalidArgument("channel gain and delay lists must be non-empty and equal length");
    if (delays_ns[0] != 0.0) throw InvalidArgument("first channel delay must be 0");
    for (std::size_t i = 1; i < delays_ns.size(); ++i)
        if (!(delays_ns[i] > delays_ns[i - 1])) throw InvalidArgument("channel delays must increase");
    if (fading == Fading::rician && !(rician_k >= 0.0)) throw InvalidArgument("rician_k must be >= 0");
}

std::vector<int> ChannelProfile::tap_indices(double sample_rate) const {
    std::vector<int> idx;
    for (double d : delays_ns) idx.push_back(static_cast<int>(std::lround(d * 1e-9 * sample_rate)));
    return idx;
}

int ChannelProfile::max_delay_samples(double sample_rate) const { return tap_indices(sample_rate).back(); }

std::vector<ChannelProfile> ChannelProfile::table() {
    const std::vector<double> g01 = {0, -7, -13}, d01 = {0, 60, 220};
    const std::vector<double> g23 = {0, -8, -10, -15}, d23 = {0, 70, 130, 270};
    return {
        {0, g01, d01, Fading::rician, 3.0, 25.0},
        {1, g01, d01, Fading::rayleigh, 3.0, 25.0},
        {2, g23, d23, Fading::rician, 3.0, 25.0},
        {3, g23, d23, Fading::rayleigh, 3.0, 25.0},
    };
}

ChannelProfile ChannelProfile::cable() { return {-1, {0.0}, {0.0}, Fading::fixed, 0.0, 0.0}; }

std::vector<TransmitterProfile> make_transmitters(std::uint64_t seed, int count, TxLayout layout) {
    Rng rng(derive_seed({seed, 0x7478}));
    const SalehParams base;
    auto perturb = [&](double v) { return v * (1.0 + rng.uniform(-0.05, 0.05)); };
    std::vector<TransmitterProfile> out;
    if (layout == TxLayout::stratified) {
        if (count != 12) throw InvalidArgument("stratified layout needs exactly 12 transmitters");
        const double bands[3][2] = {{2.0, 2.5}, {6.21, 7.21}, {10.92, 11.42}};
        for (int ps : {1, -1})
            for (const auto& band : bands)
                for (int gs : {1, -1}) {
                    TransmitterProfile t;
                    t.id = static_cast<int>(out.size());
                    t.gain_imbalance_db = gs * rng.uniform(0.8, 1.0);
                    t.phase_imbalance_deg = ps * rng.uniform(band[0], band[1]);
                    t.saleh = {perturb(base.alpha1), perturb(base.beta1), perturb(base.alpha2), perturb(base.beta2)};
                    out.push_back(t);
                }
        return out;
    }
    for (int i = 0; i < count; ++i) {
        TransmitterProfile t;
        t.id = i;
        const double gs = rng.below(2) ? 1.0 : -1.0;
        t.gain_imbalance_db = gs * rng.uniform(0.02, 1.0);
        const double ps = rng.below(2) ? 1.0 : -1.0;
        t.phase_imbalance_deg = ps * rng.uniform(2.0, 11.42);
        t.saleh = {perturb(base.alpha1), perturb(base.beta1), perturb(base.alpha2), perturb(base.beta2)};
        out.push_back(t);
    }
    return out;
}

std::pair<double, double> iq_branch_gains(double gain_imbalance_db) {
    return {std::pow(10.0, 0.5 * gain_imbalance_db / 20.0), std::pow(10.0, -0.5 * gain_imbalance_db / 20.0)};
}

ComplexVec iq_imbalance(std::span<const Complex> x, double gain_imbalance_db, double phase_deg) {
    const auto [gi, gq] = iq_branch_gains(gain_imbalance_db);
    const double th = phase_deg * kDeg;
    const Complex ei = gi * std::polar(1.0, th / 2.0);
    const Complex eq = Complex(0.0, 1.0) * gq * std::polar(1.0, -th / 2.0);
    ComplexVec out(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) out[n] = x[n].real() * ei + x[n].imag() * eq;
    return out;
}

double saleh_am(double r, const SalehParams& p) { return p.alpha1 * r / (1.0 + p.beta1 * r * r); }
double saleh_pm(double r, const SalehParams& p) { return p.alpha2 * r * r / (1.0 + p.beta2 * r * r); }

ComplexFrame apply_tx_iq_imbalance(const ComplexFrame& frame, const TransmitterProfile& profile) {
    return frame.with_samples(iq_imbalance(frame.samples(), profile.gain_imbalance_db, profile.phase_imbalance_deg));
}

ComplexFrame apply_saleh_pa(const ComplexFrame& frame, const TransmitterProfile& profile) {
    const auto& p = profile.saleh;
    const double target = (1.0 / p.beta1) * std::pow(10.0, -profile.ibo_db / 10.0);
    const double scale = std::sqrt(target / frame.mean_power());
    ComplexVec out(frame.size());
    for (std::size_t n = 0; n < frame.size(); ++n) {
        const Complex z = frame[n] * scale;
        const double r = std::abs(z);
        out[n] = std::polar(saleh_am(r, p), std::arg(z) + saleh_pm(r, p));
    }
    return frame.with_samples(normalize_power(out));
}

ComplexVec draw_channel(const ChannelProfile& channel, std::uint64_t rng_seed) {
    channel.validate();
    Rng rng(rng_seed);
    const std::size_t n = channel.avg_path_gains_db.size();
    std::vector<double> pw(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        pw[i] = std::pow(10.0, channel.avg_path_gains_db[i] / 10.0);
        total += pw[i];
    }
    ComplexVec h(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (channel.fading == Fading::fixed) {
            h[i] = std::sqrt(pw[i]);
        } else if (i == 0 && channel.fading == Fading::rician) {
            const double k = channel.rician_k;
            const double g0 = std::sqrt(pw[0]);
            const Complex los = std::polar(std::sqrt(k / (k + 1.0)) * g0, rng.phase());
            h[i] = los + std::sqrt(1.0 / (k + 1.0)) * rng.cnormal(pw[0]);
        } else {
            h[i] = rng.cnormal(pw[i]);
        }
    }
    const double g = 1.0 / std::sqrt(total);
    for (auto& c : h) c *= g;
    return h;
}

ComplexFrame apply_multipath(const ComplexFrame& frame, const ChannelProfile& channel,
                             const LinkRealization& realization) {
    const auto idx = channel.tap_indices(frame.sample_rate());
    if (realization.tap_coeffs.size() != idx.size()) throw ShapeMismatch("tap count does not match channel profile");
    ComplexVec out(frame.size() + idx.back(), 0.0);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const Complex h = realization.tap_coeffs[t];
        for (std::size_t n = 0; n < frame.size(); ++n) out[n + idx[t]] += h * frame[n];
    }
    return frame.with_samples(std::move(out));
}

ComplexFrame apply_cfo_phase(const ComplexFrame& frame, double cfo_hz, double phase_offset_rad) {
    const double ts = 1.0 / frame.sample_rate();
    ComplexVec out(frame.size());
    for (std::size_t n = 0; n < frame.size(); ++n)
        out[n] = frame[n] * std::polar(1.0, -(2.0 * kPi * cfo_hz * static_cast<double>(n) * ts + phase_offset_rad));
    return frame.with_samples(std::move(out));
}

ComplexFrame apply_lna(const ComplexFrame& frame, const ReceiverProfile& profile) {
    ComplexVec out(frame.size());
    for (std::size_t n = 0; n < frame.size(); ++n) {
        const Complex c = frame[n];
        out[n] = profile.lna_a1 * c + profile.lna_a3 * c * std::norm(c);
    }
    return frame.with_samples(std::move(out));
}

ComplexFrame apply_rx_iq_imbalance(const ComplexFrame& frame, const ReceiverProfile& profile) {
    return frame.with_samples(iq_imbalance(frame.samples(), profile.gain_imbalance_db, profile.phase_imbalance_deg));
}

ComplexFrame add_awgn(const ComplexFrame& frame, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return frame;
    const double p = frame.mean_power();
    if (!(p > 0.0)) throw InvalidArgument("cannot set SNR on a zero-power frame");
    const double noise = p / std::pow(10.0, snr_db / 10.0);
    Rng rng(seed);
    ComplexVec out(frame.vec());
    for (auto& c : out) c += rng.cnormal(noise);
    return frame.with_samples(std::move(out));
}

LinkResult simulate_link_detailed(const ComplexFrame& frame, const TransmitterProfile& tx,
                                  const ChannelProfile& ch, const ReceiverProfile& rx, double snr_db,
                                  std::uint64_t seed, const LinkOptions& opts) {
    LinkRealization real;
    real.tap_coeffs = draw_channel(ch, derive_seed({seed, kTagChannel}));
    Rng rot(derive_seed({seed, kTagRotation}));
    const double max_cfo = kCarrierHz * tx.cfo_ppm_range * 1e-6;
    real.cfo_hz = rot.uniform(-max_cfo, max_cfo);
    real.phase_offset_rad = rot.phase();
    real.snr_db = snr_db;
    real.noise_seed = derive_seed({seed, kTagNoise});

    ComplexFrame s = apply_saleh_pa(apply_tx_iq_imbalance(frame, tx), tx);
    ComplexFrame c = apply_cfo_phase(apply_multipath(s, ch, real), real.cfo_hz, real.phase_offset_rad);
    if (opts.level_normalize) c = c.with_samples(normalize_power(c.samples()));
    if (!opts.high_end) c = apply_rx_iq_imbalance(apply_lna(c, rx), rx);
    ComplexFrame y = add_awgn(c, snr_db, real.noise_seed);
    return {y.with_samples(y.vec(), FrameOrigin::received), std::move(real)};
}

ComplexFrame simulate_link(const ComplexFrame& frame, const TransmitterProfile& tx, const ChannelProfile& ch,
                           const ReceiverProfile& rx, double snr_db, std::uint64_t seed, const LinkOptions& opts) {
    return simulate_link_detailed(frame, tx, ch, rx, snr_db, seed, opts).frame;
}

}  // namespace rffi
