#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rffi/calibration.hpp"
#include "rffi/dsp_frontend.hpp"
#include "rffi/impairments.hpp"
#include "rffi/neural.hpp"

namespace rffi::harness {

enum class Scale { full, desk };
enum class SourceMode { high_end, impaired };

struct CalibrationSettings {
    double epsilon_deg = 1.0;
    int pair_count = 800;
    int batch = 2000;
    double snr_db = 50.0;
    double max_residual_cfo_hz = 1000.0;
    bool remove_cfo = false;
};

struct ExperimentConfig {
    std::uint64_t master_seed = 20240611;
    Scale scale = Scale::desk;
    int desk_factor = 8;
    int frames_per_cell = 800;  // full-scale count per (transmitter, SNR)
    std::vector<double> snr_grid_db = {0, 3, 6, 9, 12, 15, 18, 21, 24, 27, 30};
    double train_snr_db = 30.0;
    int transmitter_count = 12;
    TxLayout transmitter_layout = TxLayout::stratified;
    std::vector<ReceiverProfile> receivers = ReceiverProfile::table();
    std::vector<ChannelProfile> channels = ChannelProfile::table();
    int source_receiver = 0;
    std::vector<int> target_receivers = {1, 2};
    SourceMode source_receiver_mode = SourceMode::high_end;
    bool level_normalize = true;
    std::vector<int> split_ratios = {5, 1, 2};
    RepKind representation = RepKind::dsq;
    bool select_best_validation = true;
    ClassifierConfig classifier;
    TcnnConfig tcnn;
    CalibrationSettings calibration;
    int workers = 1;

    int frames_per_tx_snr() const;
    int snr_index(double snr_db) const;
    const ReceiverProfile& receiver(int id) const;
    const ChannelProfile& channel(int id) const;
    std::vector<TransmitterProfile> transmitters() const;
    bool source_high_end() const { return source_receiver_mode == SourceMode::high_end; }
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

std::string to_string(Scale s);
Scale parse_scale(const std::string& s);

nlohmann::json transmitter_json(const TransmitterProfile& t);

}  // namespace rffi::harness
