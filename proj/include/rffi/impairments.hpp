#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rffi/types.hpp"

namespace rffi {

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

struct SalehParams {
    double alpha1 = 2.1587;
    double beta1 = 1.1517;
    double alpha2 = 4.0033;
    double beta2 = 9.1040;
};

struct TransmitterProfile {
    int id = 0;
    double gain_imbalance_db = 0.0;
    double phase_imbalance_deg = 0.0;
    SalehParams saleh;
    double ibo_db = 15.0;
    double cfo_ppm_range = 10.0;

    void validate() const;
};

struct ReceiverProfile {
    int id = 0;
    double gain_imbalance_db = 0.0;
    double phase_imbalance_deg = 0.0;
    double lna_a1 = 1.0;
    double lna_a3 = 0.0;

    void validate() const;
    static ReceiverProfile ideal(int id = -1) { return ReceiverProfile{id, 0.0, 0.0, 1.0, 0.0}; }
    /// Rows R0, R1, R2 of the receiver impairment table.
    static std::vector<ReceiverProfile> table();
};

/// `fixed` taps have deterministic amplitude sqrt(APG) and zero phase (cable link).
enum class Fading { rician, rayleigh, fixed };

struct ChannelProfile {
    int id = 0;
    std::vector<double> avg_path_gains_db;
    std::vector<double> delays_ns;
    Fading fading = Fading::rayleigh;
    double rician_k = 3.0;
    double max_doppler_hz = 25.0;

    void validate() const;
    /// Delays rounded to the nearest sample.
    std::vector<int> tap_indices(double sample_rate = kSampleRateHz) const;
    int max_delay_samples(double sample_rate = kSampleRateHz) const;

    /// H0..H3 power delay profiles.
    static std::vector<ChannelProfile> table();
    static ChannelProfile cable();
};

struct LinkRealization {
    double cfo_hz = 0.0;
    double phase_offset_rad = 0.0;
    ComplexVec tap_coeffs;
    double snr_db = kNoNoise;
    std::uint64_t noise_seed = 0;
};

enum class TxLayout { stratified, independent };

/// Deterministic draw of `count` transmitter fingerprints. `stratified` spreads
/// them over gain sign x phase sign x three phase-magnitude bands (needs
/// count == 12); `independent` draws every parameter uniformly over its range.
std::vector<TransmitterProfile> make_transmitters(std::uint64_t seed, int count = 12,
                                                  TxLayout layout = TxLayout::stratified);

/// Branch gains (g_I, g_Q) for a gain imbalance in dB.
std::pair<double, double> iq_branch_gains(double gain_imbalance_db);
ComplexVec iq_imbalance(std::span<const Complex> x, double gain_imbalance_db, double phase_deg);

double saleh_am(double r, const SalehParams& p);
double saleh_pm(double r, const SalehParams& p);

ComplexFrame apply_tx_iq_imbalance(const ComplexFrame& frame, const TransmitterProfile& profile);
ComplexFrame apply_saleh_pa(const ComplexFrame& frame, const TransmitterProfile& profile);
ComplexVec draw_channel(const ChannelProfile& channel, std::uint64_t rng_seed);
ComplexFrame apply_multipath(const ComplexFrame& frame, const ChannelProfile& channel,
                             const LinkRealization& realization);
ComplexFrame apply_cfo_phase(const ComplexFrame& frame, double cfo_hz, double phase_offset_rad);
ComplexFrame apply_lna(const ComplexFrame& frame, const ReceiverProfile& profile);
ComplexFrame apply_rx_iq_imbalance(const ComplexFrame& frame, const ReceiverProfile& profile);
/// Noise power = measured frame power / 10^(snr/10). snr_db == kNoNoise is the identity.
ComplexFrame add_awgn(const ComplexFrame& frame, double snr_db, std::uint64_t seed);

struct LinkOptions {
    /// Skip LNA and receiver IQ imbalance.
    bool high_end = false;
    /// Rescale to unit mean power at the LNA input (fixed receiver operating point).
    bool level_normalize = true;
};

struct LinkResult {
    ComplexFrame frame;
    LinkRealization realization;
};

LinkResult simulate_link_detailed(const ComplexFrame& frame, const TransmitterProfile& tx,
                                  const ChannelProfile& ch, const ReceiverProfile& rx, double snr_db,
                                  std::uint64_t seed, const LinkOptions& opts = {});

ComplexFrame simulate_link(const ComplexFrame& frame, const TransmitterProfile& tx, const ChannelProfile& ch,
                           const ReceiverProfile& rx, double snr_db, std::uint64_t seed,
                           const LinkOptions& opts = {});

}  // namespace rffi
