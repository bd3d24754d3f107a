#pragma once

#include <cstdint>
#include <vector>

#include "rffi/impairments.hpp"
#include "rffi/types.hpp"

namespace rffi {

struct ResponseRecord {
    ComplexFrame frame;
    double estimated_po_rad = 0.0;
    int receiver_id = 0;
    double residual_cfo_hz = 0.0;  // ground truth, metadata only
    double true_po_rad = 0.0;      // ground truth, metadata only
    std::uint64_t seed = 0;
};

struct ResponseOptions {
    double snr_db = 50.0;
    double max_residual_cfo_hz = 1000.0;
    /// Skip LNA and IQ imbalance (ideal source receiver).
    bool high_end = false;
    /// Remove the true residual CFO before recording (ablation switch).
    bool remove_cfo = false;
};

struct MatchedPair {
    std::size_t target_index = 0;
    std::size_t source_index = 0;
    double phase_diff_rad = 0.0;  // circular, target minus source
};

struct CalibrationDataset {
    std::vector<ComplexFrame> targets;
    std::vector<ComplexFrame> sources;
    std::vector<MatchedPair> pairs;  // indices into the response lists used for matching
    double epsilon_deg = 1.0;
    int source_receiver_id = 0;
    int target_receiver_id = 0;

    std::size_t size() const { return targets.size(); }
    /// Pairs [begin, end) as a new dataset.
    CalibrationDataset slice(std::size_t begin, std::size_t end) const;
};

/// STF + LTF, 320 samples.
ComplexFrame calibration_challenge();

ResponseRecord simulate_response(const ComplexFrame& challenge, const ReceiverProfile& rx, std::uint64_t seed,
                                 const ResponseOptions& opts = {});

enum class PoEstimator { circular_mean, arithmetic_mean };

/// angle(sum response * conj(challenge)) by default; `arithmetic_mean` averages
/// per-sample phase differences without unwrapping.
double estimate_phase_offset(const ComplexFrame& response, const ComplexFrame& challenge,
                             PoEstimator kind = PoEstimator::circular_mean);

/// Greedy two-pointer sweep over both lists sorted by phase, with circular
/// differences. Throws InsufficientMatches when fewer than `want` pairs exist.
CalibrationDataset match_response_pairs(const std::vector<ResponseRecord>& source,
                                        const std::vector<ResponseRecord>& target, double epsilon_deg,
                                        std::size_t want);

/// Pairs found without the `want` requirement.
std::vector<MatchedPair> find_matches(const std::vector<ResponseRecord>& source,
                                      const std::vector<ResponseRecord>& target, double epsilon_rad);

inline constexpr double kNmseFloorDb = -300.0;

/// Mean over pairs of 10 log10(sum |mapped - ref|^2 / sum |ref|^2).
double compute_nmse(const std::vector<ComplexFrame>& mapped, const std::vector<ComplexFrame>& reference);

struct CalibrationBuildOptions {
    std::size_t want = 800;
    std::size_t batch = 2000;
    double epsilon_deg = 1.0;
    int max_batches = 50;
    ResponseOptions source_opts{50.0, 1000.0, true, false};
    ResponseOptions target_opts{50.0, 1000.0, false, false};
};

/// Collects responses in batches until `want` matches exist, then keeps the
/// first `want` pairs in phase order.
CalibrationDataset build_calibration_dataset(const ReceiverProfile& source, const ReceiverProfile& target,
                                             std::uint64_t seed, const CalibrationBuildOptions& opts = {});

}  // namespace rffi
