#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rffi/harness/config.hpp"

namespace rffi::harness {

enum class Split : std::uint8_t { none, train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct FrameRecord {
    int tx = 0;
    double snr_db = 0.0;
    int snr_index = 0;
    int channel_id = 0;
    int receiver_id = 0;
    std::uint64_t frame_seed = 0;
    Split split = Split::none;
    double cfo_hz = 0.0;
    double phase_offset_rad = 0.0;
    ComplexVec taps;
};

struct LabeledDataset {
    std::string name;
    int receiver_id = 0;
    int channel_id = 0;
    bool high_end = false;
    std::uint64_t master_seed = 0;
    std::string scale = "desk";
    int desk_factor = 1;
    int frames_per_tx_snr = 0;
    std::vector<double> snr_grid_db;
    std::vector<TransmitterProfile> transmitters;
    std::vector<FrameRecord> records;
    std::vector<ComplexFrame> frames;

    std::size_t size() const { return records.size(); }
    /// Indices of records in `split` (any split when none), optionally at one SNR.
    std::vector<std::size_t> select(Split split, const double* snr_db = nullptr) const;
};

std::string dataset_name(int receiver_id, int channel_id);

/// Runs fn(i, worker) for i in [0, n) over `workers` threads with static
/// chunks. The result never depends on the worker count as long as fn only
/// writes slot i and keeps per-worker scratch state indexed by `worker`.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, int)>& fn);

/// Every (tx, SNR, frame) of one receiver/channel combination, with frames
/// rounded to float32 precision so the in-memory and on-disk copies agree.
/// The configured source receiver runs in high-end mode when the config says so.
LabeledDataset generate_dataset(const ReceiverProfile& receiver, const ChannelProfile& channel,
                                const ExperimentConfig& config);

/// Stratified deterministic 5:1:2 split per (tx, SNR) cell; remainder to train.
LabeledDataset& split_dataset(LabeledDataset& data, const std::vector<int>& ratios, std::uint64_t seed);

/// Counts per cell for a ratio triple: {train, val, test}.
std::array<int, 3> split_counts(int cell_size, const std::vector<int>& ratios);

/// Rounds samples to float32, the precision of the on-disk blobs.
ComplexVec to_float_precision(const ComplexVec& v);
CalibrationDataset& to_float_precision(CalibrationDataset& d);

void save_dataset(const LabeledDataset& data, const std::string& dir);
LabeledDataset load_dataset(const std::string& manifest_path);

void save_calibration(const CalibrationDataset& data, const nlohmann::json& extra, const std::string& dir,
                      const std::string& name);
CalibrationDataset load_calibration(const std::string& manifest_path);

/// Pair indices for train/val/test: index mod (sum of ratios) picks the split.
std::array<std::vector<std::size_t>, 3> split_calibration_indices(std::size_t n, const std::vector<int>& ratios);
CalibrationDataset subset(const CalibrationDataset& d, const std::vector<std::size_t>& idx);

}  // namespace rffi::harness
