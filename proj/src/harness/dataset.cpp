#include "rffi/harness/dataset.hpp"

#include <array>
#include <bit>
#include <map>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "rffi/rng.hpp"
#include "rffi/waveform.hpp"

namespace rffi::harness {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Split s) {
    switch (s) {
        case Split::none: return "none";
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    for (auto v : {Split::none, Split::train, Split::val, Split::test})
        if (to_string(v) == s) return v;
    throw FormatError("unknown split " + s);
}

std::string dataset_name(int receiver_id, int channel_id) {
    return "D_R" + std::to_string(receiver_id) + "_H" + std::to_string(channel_id);
}

std::vector<std::size_t> LabeledDataset::select(Split split, const double* snr_db) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (split != Split::none && records[i].split != split) continue;
        if (snr_db && records[i].snr_db != *snr_db) continue;
        out.push_back(i);
    }
    return out;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, int)>& fn) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(w);
    for (std::size_t k = 0; k < w; ++k)
        pool.emplace_back([&, k] {
            try {
                for (std::size_t i = k * n / w; i < (k + 1) * n / w; ++i) fn(i, static_cast<int>(k));
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

ComplexVec to_float_precision(const ComplexVec& v) {
    // Flat over the interleaved doubles: GCC 11 -O3 drops the cast on the odd
    // tail element when this is written per complex sample.
    ComplexVec out(v);
    double* p = reinterpret_cast<double*>(out.data());
    for (std::size_t i = 0; i < 2 * out.size(); ++i) p[i] = static_cast<float>(p[i]);
    return out;
}

CalibrationDataset& to_float_precision(CalibrationDataset& d) {
    for (auto* list : {&d.targets, &d.sources})
        for (auto& f : *list) f = f.with_samples(to_float_precision(f.vec()));
    return d;
}

namespace {

void write_iq(std::ostream& o, const ComplexFrame& f) {
    for (const auto& c : f.samples()) {
        for (double d : {c.real(), c.imag()}) {
            const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(d));
            const unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                        static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
            o.write(reinterpret_cast<const char*>(b), 4);
        }
    }
}

ComplexVec read_iq(std::istream& in, std::size_t n) {
    ComplexVec v(n);
    for (auto& c : v) {
        float parts[2];
        for (float& p : parts) {
            unsigned char b[4];
            if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated I/Q blob");
            const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
                                    static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
            p = std::bit_cast<float>(u);
        }
        c = {parts[0], parts[1]};
    }
    return v;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw IoError("cannot write " + path);
    o << text;
    if (!o) throw IoError("write failed: " + path);
}

std::string blob_path_for(const std::string& manifest_path, const std::string& blob_name) {
    return (fs::path(manifest_path).parent_path() / blob_name).string();
}

TransmitterProfile transmitter_from(const json& j) {
    TransmitterProfile t;
    t.id = j.at("id");
    t.gain_imbalance_db = j.at("gain_imbalance_db");
    t.phase_imbalance_deg = j.at("phase_imbalance_deg");
    const auto& s = j.at("saleh");
    t.saleh = {s.at("alpha1"), s.at("beta1"), s.at("alpha2"), s.at("beta2")};
    t.ibo_db = j.at("ibo_db");
    t.cfo_ppm_range = j.at("cfo_ppm_range");
    return t;
}

}  // namespace

LabeledDataset generate_dataset(const ReceiverProfile& receiver, const ChannelProfile& channel,
                                const ExperimentConfig& config) {
    config.validate();
    LabeledDataset d;
    d.name = dataset_name(receiver.id, channel.id);
    d.receiver_id = receiver.id;
    d.channel_id = channel.id;
    d.high_end = receiver.id == config.source_receiver && config.source_high_end();
    d.master_seed = config.master_seed;
    d.scale = to_string(config.scale);
    d.desk_factor = config.scale == Scale::desk ? config.desk_factor : 1;
    d.frames_per_tx_snr = config.frames_per_tx_snr();
    d.snr_grid_db = config.snr_grid_db;
    d.transmitters = config.transmitters();

    const int ntx = config.transmitter_count;
    const int nsnr = static_cast<int>(config.snr_grid_db.size());
    const int per = d.frames_per_tx_snr;
    const std::size_t total = static_cast<std::size_t>(ntx) * nsnr * per;
    d.records.resize(total);
    d.frames.resize(total);
    const ComplexFrame base = assemble_frame(false, 0);
    const LinkOptions opts{d.high_end, config.level_normalize};
    parallel_for(total, config.workers, [&](std::size_t i, int) {
        const int tx = static_cast<int>(i / (static_cast<std::size_t>(nsnr) * per));
        const int si = static_cast<int>((i / per) % nsnr);
        const int k = static_cast<int>(i % per);
        FrameRecord& r = d.records[i];
        r.tx = tx;
        r.snr_index = si;
        r.snr_db = config.snr_grid_db[si];
        r.channel_id = channel.id;
        r.receiver_id = receiver.id;
        r.frame_seed = derive_seed({config.master_seed, 0xda7a, static_cast<std::uint64_t>(receiver.id),
                                    static_cast<std::uint64_t>(channel.id), static_cast<std::uint64_t>(tx),
                                    static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(k)});
        auto res = simulate_link_detailed(base, d.transmitters[tx], channel, receiver, r.snr_db, r.frame_seed, opts);
        r.cfo_hz = res.realization.cfo_hz;
        r.phase_offset_rad = res.realization.phase_offset_rad;
        r.taps = res.realization.tap_coeffs;
        d.frames[i] = res.frame.with_samples(to_float_precision(res.frame.vec()));
    });
    split_dataset(d, config.split_ratios, derive_seed({config.master_seed, 0x5b17}));
    return d;
}

std::array<int, 3> split_counts(int cell_size, const std::vector<int>& ratios) {
    if (ratios.size() != 3) throw InvalidArgument("split needs three ratios");
    const int sum = ratios[0] + ratios[1] + ratios[2];
    for (int r : ratios)
        if (r <= 0) throw InvalidArgument("split ratios must be positive");
    const int val = cell_size * ratios[1] / sum;
    const int test = cell_size * ratios[2] / sum;
    return {cell_size - val - test, val, test};
}

LabeledDataset& split_dataset(LabeledDataset& data, const std::vector<int>& ratios, std::uint64_t seed) {
    std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        cells[{data.records[i].tx, data.records[i].snr_index}].push_back(i);
    for (auto& [key, idx] : cells) {
        const auto c = split_counts(static_cast<int>(idx.size()), ratios);
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(key.first), static_cast<std::uint64_t>(key.second)}));
        rng.shuffle(idx.begin(), idx.end());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const int ki = static_cast<int>(k);
            data.records[idx[k]].split = ki < c[1] ? Split::val : ki < c[1] + c[2] ? Split::test : Split::train;
        }
    }
    return data;
}

void save_dataset(const LabeledDataset& data, const std::string& dir) {
    fs::create_directories(dir);
    if (data.frames.empty()) throw EmptyDataset("nothing to save");
    const std::size_t len = data.frames.front().size();
    json recs = json::array();
    for (const auto& r : data.records) {
        json taps = json::array();
        for (const auto& t : r.taps) taps.push_back({t.real(), t.imag()});
        recs.push_back({{"tx", r.tx}, {"snr_db", r.snr_db}, {"snr_index", r.snr_index}, {"split", to_string(r.split)},
                        {"frame_seed", r.frame_seed}, {"cfo_hz", r.cfo_hz}, {"phase_offset_rad", r.phase_offset_rad},
                        {"taps", taps}});
    }
    json tx = json::array();
    for (const auto& t : data.transmitters) tx.push_back(transmitter_json(t));
    const std::string blob = data.name + ".bin";
    json m = {{"name", data.name},
              {"receiver_id", data.receiver_id},
              {"channel_id", data.channel_id},
              {"high_end", data.high_end},
              {"master_seed", data.master_seed},
              {"scale", data.scale},
              {"desk_factor", data.desk_factor},
              {"frames_per_tx_snr", data.frames_per_tx_snr},
              {"snr_grid_db", data.snr_grid_db},
              {"sample_rate_hz", data.frames.front().sample_rate()},
              {"frame_length", len},
              {"blob", blob},
              {"blob_format", "float32 little-endian interleaved I,Q; record-major"},
              {"transmitters", tx},
              {"records", recs}};
    write_text((fs::path(dir) / (data.name + ".json")).string(), m.dump(1) + "\n");
    std::ofstream o(fs::path(dir) / blob, std::ios::binary);
    if (!o) throw IoError("cannot write blob in " + dir);
    for (const auto& f : data.frames) {
        if (f.size() != len) throw ShapeMismatch("frames in a dataset must share one length");
        write_iq(o, f);
    }
    if (!o) throw IoError("blob write failed in " + dir);
}

LabeledDataset load_dataset(const std::string& manifest_path) {
    const json m = read_json(manifest_path);
    LabeledDataset d;
    try {
        d.name = m.at("name");
        d.receiver_id = m.at("receiver_id");
        d.channel_id = m.at("channel_id");
        d.high_end = m.at("high_end");
        d.master_seed = m.at("master_seed");
        d.scale = m.at("scale");
        d.desk_factor = m.at("desk_factor");
        d.frames_per_tx_snr = m.at("frames_per_tx_snr");
        d.snr_grid_db = m.at("snr_grid_db").get<std::vector<double>>();
        for (const auto& t : m.at("transmitters")) d.transmitters.push_back(transmitter_from(t));
        for (const auto& r : m.at("records")) {
            FrameRecord f;
            f.tx = r.at("tx");
            f.snr_db = r.at("snr_db");
            f.snr_index = r.at("snr_index");
            f.split = parse_split(r.at("split"));
            f.frame_seed = r.at("frame_seed");
            f.cfo_hz = r.at("cfo_hz");
            f.phase_offset_rad = r.at("phase_offset_rad");
            for (const auto& t : r.at("taps")) f.taps.emplace_back(t.at(0).get<double>(), t.at(1).get<double>());
            f.receiver_id = d.receiver_id;
            f.channel_id = d.channel_id;
            d.records.push_back(std::move(f));
        }
        const std::size_t len = m.at("frame_length");
        const double fs_hz = m.at("sample_rate_hz");
        std::ifstream in(blob_path_for(manifest_path, m.at("blob")), std::ios::binary);
        if (!in) throw IoError("cannot open dataset blob for " + manifest_path);
        for (std::size_t i = 0; i < d.records.size(); ++i)
            d.frames.emplace_back(read_iq(in, len), fs_hz, FrameOrigin::received);
    } catch (const json::exception& e) {
        throw FormatError(manifest_path + ": " + e.what());
    }
    return d;
}

void save_calibration(const CalibrationDataset& data, const json& extra, const std::string& dir,
                      const std::string& name) {
    fs::create_directories(dir);
    if (data.size() == 0) throw EmptyDataset("no calibration pairs to save");
    const std::size_t len = data.targets.front().size();
    json pairs = json::array();
    for (const auto& p : data.pairs)
        pairs.push_back({{"target_index", p.target_index}, {"source_index", p.source_index}, {"phase_diff_rad", p.phase_diff_rad}});
    json m = {{"name", name},
              {"epsilon_deg", data.epsilon_deg},
              {"pair_count", data.size()},
              {"source_receiver_id", data.source_receiver_id},
              {"target_receiver_id", data.target_receiver_id},
              {"frame_length", len},
              {"sample_rate_hz", data.targets.front().sample_rate()},
              {"blob", name + ".bin"},
              {"blob_format", "float32 little-endian interleaved I,Q; pair-major, target frame then source frame"},
              {"pairs", pairs},
              {"extra", extra}};
    write_text((fs::path(dir) / (name + ".json")).string(), m.dump(1) + "\n");
    std::ofstream o(fs::path(dir) / (name + ".bin"), std::ios::binary);
    if (!o) throw IoError("cannot write calibration blob in " + dir);
    for (std::size_t i = 0; i < data.size(); ++i) {
        write_iq(o, data.targets[i]);
        write_iq(o, data.sources[i]);
    }
    if (!o) throw IoError("calibration blob write failed");
}

CalibrationDataset load_calibration(const std::string& manifest_path) {
    const json m = read_json(manifest_path);
    CalibrationDataset d;
    try {
        d.epsilon_deg = m.at("epsilon_deg");
        d.source_receiver_id = m.at("source_receiver_id");
        d.target_receiver_id = m.at("target_receiver_id");
        for (const auto& p : m.at("pairs"))
            d.pairs.push_back({p.at("target_index"), p.at("source_index"), p.at("phase_diff_rad")});
        const std::size_t n = m.at("pair_count");
        const std::size_t len = m.at("frame_length");
        const double fs_hz = m.at("sample_rate_hz");
        std::ifstream in(blob_path_for(manifest_path, m.at("blob")), std::ios::binary);
        if (!in) throw IoError("cannot open calibration blob for " + manifest_path);
        for (std::size_t i = 0; i < n; ++i) {
            d.targets.emplace_back(read_iq(in, len), fs_hz, FrameOrigin::received);
            d.sources.emplace_back(read_iq(in, len), fs_hz, FrameOrigin::received);
        }
    } catch (const json::exception& e) {
        throw FormatError(manifest_path + ": " + e.what());
    }
    return d;
}

std::array<std::vector<std::size_t>, 3> split_calibration_indices(std::size_t n, const std::vector<int>& ratios) {
    if (ratios.size() != 3) throw InvalidArgument("split needs three ratios");
    const std::size_t sum = static_cast<std::size_t>(ratios[0] + ratios[1] + ratios[2]);
    std::array<std::vector<std::size_t>, 3> out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = i % sum;
        out[r < static_cast<std::size_t>(ratios[0]) ? 0 : r < static_cast<std::size_t>(ratios[0] + ratios[1]) ? 1 : 2]
            .push_back(i);
    }
    return out;
}

CalibrationDataset subset(const CalibrationDataset& d, const std::vector<std::size_t>& idx) {
    CalibrationDataset s;
    s.epsilon_deg = d.epsilon_deg;
    s.source_receiver_id = d.source_receiver_id;
    s.target_receiver_id = d.target_receiver_id;
    for (std::size_t i : idx) {
        s.targets.push_back(d.targets.at(i));
        s.sources.push_back(d.sources.at(i));
        if (d.pairs.size() == d.size()) s.pairs.push_back(d.pairs[i]);
    }
    return s;
}

}  // namespace rffi::harness
