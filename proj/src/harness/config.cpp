#include "rffi/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "rffi/rng.hpp"

namespace rffi::harness {

using nlohmann::json;

namespace {

std::string fading_name(Fading f) {
    switch (f) {
        case Fading::rician: return "rician";
        case Fading::rayleigh: return "rayleigh";
        case Fading::fixed: return "fixed";
    }
    return "?";
}

Fading parse_fading(const std::string& s) {
    if (s == "rician") return Fading::rician;
    if (s == "rayleigh") return Fading::rayleigh;
    if (s == "fixed") return Fading::fixed;
    throw InvalidArgument("unknown fading type: " + s);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidArgument(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw InvalidArgument("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string to_string(Scale s) { return s == Scale::full ? "full" : "desk"; }

Scale parse_scale(const std::string& s) {
    if (s == "full") return Scale::full;
    if (s == "desk") return Scale::desk;
    throw InvalidArgument("scale must be full or desk");
}

int ExperimentConfig::frames_per_tx_snr() const {
    return scale == Scale::full ? frames_per_cell : frames_per_cell / desk_factor;
}

int ExperimentConfig::snr_index(double snr_db) const {
    for (std::size_t i = 0; i < snr_grid_db.size(); ++i)
        if (snr_grid_db[i] == snr_db) return static_cast<int>(i);
    throw NotFound("SNR not on grid");
}

const ReceiverProfile& ExperimentConfig::receiver(int id) const {
    for (const auto& r : receivers)
        if (r.id == id) return r;
    throw NotFound("no receiver R" + std::to_string(id));
}

const ChannelProfile& ExperimentConfig::channel(int id) const {
    for (const auto& c : channels)
        if (c.id == id) return c;
    throw NotFound("no channel H" + std::to_string(id));
}

std::vector<TransmitterProfile> ExperimentConfig::transmitters() const {
    return make_transmitters(derive_seed({master_seed, 0x7e}), transmitter_count, transmitter_layout);
}

void ExperimentConfig::validate() const {
    if (frames_per_cell <= 0 || desk_factor <= 0 || frames_per_tx_snr() <= 0)
        throw InvalidArgument("frames per cell must be positive");
    if (snr_grid_db.empty()) throw InvalidArgument("empty SNR grid");
    snr_index(train_snr_db);
    if (split_ratios.size() != 3) throw InvalidArgument("split_ratios needs three entries");
    for (int r : split_ratios)
        if (r <= 0) throw InvalidArgument("split ratios must be positive");
    if (transmitter_count != classifier.classes)
        throw InvalidArgument("transmitter_count must equal classifier classes");
    receiver(source_receiver);
    for (int t : target_receivers) receiver(t);
    for (const auto& r : receivers) r.validate();
    for (const auto& c : channels) c.validate();
    classifier.validate();
    tcnn.validate();
    if (workers < 1) throw InvalidArgument("workers must be >= 1");
}

json transmitter_json(const TransmitterProfile& t) {
    return {{"id", t.id},
            {"gain_imbalance_db", t.gain_imbalance_db},
            {"phase_imbalance_deg", t.phase_imbalance_deg},
            {"saleh", {{"alpha1", t.saleh.alpha1}, {"beta1", t.saleh.beta1}, {"alpha2", t.saleh.alpha2}, {"beta2", t.saleh.beta2}}},
            {"ibo_db", t.ibo_db},
            {"cfo_ppm_range", t.cfo_ppm_range}};
}

json to_json(const ExperimentConfig& c) {
    json rx = json::array();
    for (const auto& r : c.receivers)
        rx.push_back({{"id", r.id},
                      {"gain_imbalance_db", r.gain_imbalance_db},
                      {"phase_imbalance_deg", r.phase_imbalance_deg},
                      {"lna_a1", r.lna_a1},
                      {"lna_a3", r.lna_a3}});
    json ch = json::array();
    for (const auto& h : c.channels)
        ch.push_back({{"id", h.id},
                      {"avg_path_gains_db", h.avg_path_gains_db},
                      {"delays_ns", h.delays_ns},
                      {"fading", fading_name(h.fading)},
                      {"rician_k", h.rician_k},
                      {"max_doppler_hz", h.max_doppler_hz}});
    const auto& k = c.classifier;
    const auto& t = c.tcnn;
    return {
        {"master_seed", c.master_seed},
        {"scale", to_string(c.scale)},
        {"desk_factor", c.desk_factor},
        {"frames_per_cell", c.frames_per_cell},
        {"snr_grid_db", c.snr_grid_db},
        {"train_snr_db", c.train_snr_db},
        {"transmitter_count", c.transmitter_count},
        {"transmitter_layout", c.transmitter_layout == TxLayout::stratified ? "stratified" : "independent"},
        {"receivers", rx},
        {"channels", ch},
        {"source_receiver", c.source_receiver},
        {"target_receivers", c.target_receivers},
        {"source_receiver_mode", c.source_receiver_mode == SourceMode::high_end ? "high_end" : "impaired"},
        {"level_normalize", c.level_normalize},
        {"split_ratios", c.split_ratios},
        {"representation", to_string(c.representation)},
        {"select_best_validation", c.select_best_validation},
        {"classifier",
         {{"conv_filters", k.conv_filters}, {"kernel", k.kernel}, {"stride", k.stride}, {"padding", k.padding},
          {"leaky_slope", k.leaky_slope}, {"pool", k.pool}, {"classes", k.classes}, {"l2_strength", k.l2_strength},
          {"lr", k.lr}, {"lr_decay_every", k.lr_decay_every}, {"lr_decay_factor", k.lr_decay_factor},
          {"epochs", k.epochs}, {"batch", k.batch}}},
        {"tcnn",
         {{"hidden", t.hidden}, {"leaky_slope", t.leaky_slope}, {"lr", t.lr}, {"epochs", t.epochs}, {"batch", t.batch}}},
        {"calibration",
         {{"epsilon_deg", c.calibration.epsilon_deg}, {"pair_count", c.calibration.pair_count},
          {"batch", c.calibration.batch}, {"snr_db", c.calibration.snr_db},
          {"max_residual_cfo_hz", c.calibration.max_residual_cfo_hz}, {"remove_cfo", c.calibration.remove_cfo}}},
        {"workers", c.workers},
    };
}

ExperimentConfig config_from_json(const json& j) {
    check_keys(j,
               {"master_seed", "scale", "desk_factor", "frames_per_cell", "snr_grid_db", "train_snr_db",
                "transmitter_count", "transmitter_layout", "receivers", "channels", "source_receiver",
                "target_receivers", "source_receiver_mode", "level_normalize", "split_ratios", "representation",
                "select_best_validation", "classifier", "tcnn", "calibration", "workers"},
               "config");
    ExperimentConfig c;
    get_if(j, "master_seed", c.master_seed);
    if (j.contains("scale")) c.scale = parse_scale(j["scale"]);
    get_if(j, "desk_factor", c.desk_factor);
    get_if(j, "frames_per_cell", c.frames_per_cell);
    get_if(j, "snr_grid_db", c.snr_grid_db);
    get_if(j, "train_snr_db", c.train_snr_db);
    get_if(j, "transmitter_count", c.transmitter_count);
    if (j.contains("transmitter_layout")) {
        const std::string s = j["transmitter_layout"];
        if (s == "stratified") c.transmitter_layout = TxLayout::stratified;
        else if (s == "independent") c.transmitter_layout = TxLayout::independent;
        else throw InvalidArgument("transmitter_layout must be stratified or independent");
    }
    if (j.contains("receivers")) {
        c.receivers.clear();
        for (const auto& r : j["receivers"]) {
            check_keys(r, {"id", "gain_imbalance_db", "phase_imbalance_deg", "lna_a1", "lna_a3"}, "receiver");
            ReceiverProfile p;
            p.id = r.at("id");
            get_if(r, "gain_imbalance_db", p.gain_imbalance_db);
            get_if(r, "phase_imbalance_deg", p.phase_imbalance_deg);
            get_if(r, "lna_a1", p.lna_a1);
            get_if(r, "lna_a3", p.lna_a3);
            c.receivers.push_back(p);
        }
    }
    if (j.contains("channels")) {
        c.channels.clear();
        for (const auto& h : j["channels"]) {
            check_keys(h, {"id", "avg_path_gains_db", "delays_ns", "fading", "rician_k", "max_doppler_hz"}, "channel");
            ChannelProfile p;
            p.id = h.at("id");
            p.avg_path_gains_db = h.at("avg_path_gains_db").get<std::vector<double>>();
            p.delays_ns = h.at("delays_ns").get<std::vector<double>>();
            p.fading = parse_fading(h.at("fading"));
            get_if(h, "rician_k", p.rician_k);
            get_if(h, "max_doppler_hz", p.max_doppler_hz);
            c.channels.push_back(p);
        }
    }
    get_if(j, "source_receiver", c.source_receiver);
    get_if(j, "target_receivers", c.target_receivers);
    if (j.contains("source_receiver_mode")) {
        const std::string s = j["source_receiver_mode"];
        if (s == "high_end") c.source_receiver_mode = SourceMode::high_end;
        else if (s == "impaired") c.source_receiver_mode = SourceMode::impaired;
        else throw InvalidArgument("source_receiver_mode must be high_end or impaired");
    }
    get_if(j, "level_normalize", c.level_normalize);
    get_if(j, "split_ratios", c.split_ratios);
    if (j.contains("representation")) c.representation = parse_rep_kind(j["representation"]);
    get_if(j, "select_best_validation", c.select_best_validation);
    if (j.contains("classifier")) {
        const auto& k = j["classifier"];
        check_keys(k, {"conv_filters", "kernel", "stride", "padding", "leaky_slope", "pool", "classes", "l2_strength", "lr",
                       "lr_decay_every", "lr_decay_factor", "epochs", "batch"},
                   "classifier");
        auto& o = c.classifier;
        get_if(k, "conv_filters", o.conv_filters);
        get_if(k, "kernel", o.kernel);
        get_if(k, "stride", o.stride);
        get_if(k, "padding", o.padding);
        get_if(k, "leaky_slope", o.leaky_slope);
        get_if(k, "pool", o.pool);
        get_if(k, "classes", o.classes);
        get_if(k, "l2_strength", o.l2_strength);
        get_if(k, "lr", o.lr);
        get_if(k, "lr_decay_every", o.lr_decay_every);
        get_if(k, "lr_decay_factor", o.lr_decay_factor);
        get_if(k, "epochs", o.epochs);
        get_if(k, "batch", o.batch);
    }
    if (j.contains("tcnn")) {
        const auto& t = j["tcnn"];
        check_keys(t, {"hidden", "leaky_slope", "lr", "epochs", "batch"}, "tcnn");
        get_if(t, "hidden", c.tcnn.hidden);
        get_if(t, "leaky_slope", c.tcnn.leaky_slope);
        get_if(t, "lr", c.tcnn.lr);
        get_if(t, "epochs", c.tcnn.epochs);
        get_if(t, "batch", c.tcnn.batch);
    }
    if (j.contains("calibration")) {
        const auto& k = j["calibration"];
        check_keys(k, {"epsilon_deg", "pair_count", "batch", "snr_db", "max_residual_cfo_hz", "remove_cfo"}, "calibration");
        get_if(k, "epsilon_deg", c.calibration.epsilon_deg);
        get_if(k, "pair_count", c.calibration.pair_count);
        get_if(k, "batch", c.calibration.batch);
        get_if(k, "snr_db", c.calibration.snr_db);
        get_if(k, "max_residual_cfo_hz", c.calibration.max_residual_cfo_hz);
        get_if(k, "remove_cfo", c.calibration.remove_cfo);
    }
    get_if(j, "workers", c.workers);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("config " + path + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw FormatError("config " + path + ": " + e.what());
    }
}

}  // namespace rffi::harness
