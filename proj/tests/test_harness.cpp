#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rffi/harness/experiment.hpp"
#include "rffi/waveform.hpp"

using namespace rffi;
using namespace rffi::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rffi_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RFFI_CLI) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("record counts per scale") {
    ExperimentConfig c;
    c.scale = Scale::full;
    CHECK(c.frames_per_tx_snr() == 800);
    CHECK(c.transmitter_count * static_cast<int>(c.snr_grid_db.size()) * c.frames_per_tx_snr() == 105600);
    c.scale = Scale::desk;
    CHECK(c.frames_per_tx_snr() == 100);
    const LabeledDataset d = generate_dataset(c.receivers[0], c.channels[0], c);
    CHECK(d.size() == 13200);
    CHECK(d.frames.size() == 13200);
    CHECK(d.name == "D_R0_H0");
}

TEST_CASE("float32 rounding of odd-length vectors") {
    for (std::size_t n : {1u, 2u, 3u, 5u, 325u}) {
        ComplexVec v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = {0.0662056427556 + 1e-3 * i, -0.1 - 1e-4 * i};
        const ComplexVec r = to_float_precision(v);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(r[i].real() == static_cast<double>(static_cast<float>(v[i].real())));
            CHECK(r[i].imag() == static_cast<double>(static_cast<float>(v[i].imag())));
        }
    }
}

TEST_CASE("split counts and stratification") {
    CHECK(split_counts(800, {5, 1, 2}) == std::array<int, 3>{500, 100, 200});
    CHECK(split_counts(100, {5, 1, 2}) == std::array<int, 3>{63, 12, 25});
    CHECK(split_counts(8, {5, 1, 2}) == std::array<int, 3>{5, 1, 2});

    ExperimentConfig c;
    c.snr_grid_db = {10, 30};
    const LabeledDataset d = generate_dataset(c.receivers[1], c.channels[2], c);
    for (Split s : {Split::train, Split::val, Split::test}) {
        for (double snr : c.snr_grid_db) {
            std::map<int, int> per_tx;
            for (auto i : d.select(s, &snr)) ++per_tx[d.records[i].tx];
            CHECK(per_tx.size() == 12);
            for (auto [tx, n] : per_tx) CHECK(n == split_counts(100, {5, 1, 2})[static_cast<int>(s) - 1]);
        }
    }
    LabeledDataset e = d;
    split_dataset(e, c.split_ratios, 99);
    LabeledDataset f = d;
    split_dataset(f, c.split_ratios, 99);
    bool same = true, moved = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
        same = same && e.records[i].split == f.records[i].split;
        moved = moved || e.records[i].split != d.records[i].split;
    }
    CHECK(same);
    CHECK(moved);
}

TEST_CASE("dataset generation is reproducible and worker-count independent") {
    ExperimentConfig c;
    c.snr_grid_db = {12};
    c.train_snr_db = 12;
    const LabeledDataset a = generate_dataset(c.receivers[2], c.channels[3], c);
    c.workers = 3;
    const LabeledDataset b = generate_dataset(c.receivers[2], c.channels[3], c);
    CHECK(a.frames == b.frames);
    c.master_seed += 1;
    const LabeledDataset e = generate_dataset(c.receivers[2], c.channels[3], c);
    CHECK(a.frames != e.frames);
}

TEST_CASE("dataset metadata regenerates each frame") {
    ExperimentConfig c;
    c.snr_grid_db = {18};
    c.train_snr_db = 18;
    const LabeledDataset d = generate_dataset(c.receivers[1], c.channels[2], c);
    const auto txs = c.transmitters();
    for (std::size_t i = 0; i < d.size(); i += 97) {
        const FrameRecord& r = d.records[i];
        const LinkResult l = simulate_link_detailed(assemble_frame(), txs[r.tx], c.channel(r.channel_id),
                                                    c.receiver(r.receiver_id), r.snr_db, r.frame_seed);
        CHECK(l.realization.cfo_hz == r.cfo_hz);
        CHECK(l.realization.phase_offset_rad == r.phase_offset_rad);
        CHECK(l.realization.tap_coeffs == r.taps);
        REQUIRE(l.frame.size() == d.frames[i].size());
        for (std::size_t n = 0; n < l.frame.size(); ++n) {
            CHECK(static_cast<float>(l.frame[n].real()) == d.frames[i][n].real());
            CHECK(static_cast<float>(l.frame[n].imag()) == d.frames[i][n].imag());
        }
    }
}

TEST_CASE("dataset files round-trip and are byte-stable") {
    const fs::path dir = scratch("ds");
    ExperimentConfig c;
    c.snr_grid_db = {0, 30};
    const LabeledDataset d = generate_dataset(c.receivers[0], c.channels[1], c);
    for (const auto& f : d.frames) CHECK(to_float_precision(f.vec()) == f.vec());
    save_dataset(d, (dir / "a").string());
    save_dataset(d, (dir / "b").string());
    CHECK(slurp(dir / "a" / "D_R0_H1.bin") == slurp(dir / "b" / "D_R0_H1.bin"));
    CHECK(slurp(dir / "a" / "D_R0_H1.json") == slurp(dir / "b" / "D_R0_H1.json"));
    CHECK(fs::file_size(dir / "a" / "D_R0_H1.bin") == d.size() * d.frames[0].size() * 8);
    const LabeledDataset r = load_dataset((dir / "a" / "D_R0_H1.json").string());
    CHECK(r.frames == d.frames);
    CHECK(r.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(r.records[i].split == d.records[i].split);
        CHECK(r.records[i].tx == d.records[i].tx);
        CHECK(r.records[i].frame_seed == d.records[i].frame_seed);
        CHECK(r.records[i].taps == d.records[i].taps);
    }
    CHECK(r.transmitters.size() == 12);
    CHECK_THROWS_AS(load_dataset((dir / "nope.json").string()), IoError);
    fs::resize_file(dir / "b" / "D_R0_H1.bin", 100);
    CHECK_THROWS_AS(load_dataset((dir / "b" / "D_R0_H1.json").string()), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("calibration split and files") {
    const auto parts = split_calibration_indices(800, {5, 1, 2});
    CHECK(parts[0].size() == 500);
    CHECK(parts[1].size() == 100);
    CHECK(parts[2].size() == 200);
    std::set<std::size_t> all;
    for (const auto& p : parts) all.insert(p.begin(), p.end());
    CHECK(all.size() == 800);

    CalibrationBuildOptions o;
    o.want = 16;
    o.batch = 200;
    const auto rx = ReceiverProfile::table();
    CalibrationDataset d = build_calibration_dataset(rx[0], rx[2], 3, o);
    to_float_precision(d);
    const fs::path dir = scratch("cal");
    save_calibration(d, {{"note", 1}}, dir.string(), "C_R0_R2");
    const CalibrationDataset r = load_calibration((dir / "C_R0_R2.json").string());
    CHECK(r.targets == d.targets);
    CHECK(r.sources == d.sources);
    CHECK(r.target_receiver_id == 2);
    CHECK(subset(d, {1, 3}).targets[1] == d.targets[3]);
    fs::remove_all(dir);
}

TEST_CASE("pcc and confusion matrix") {
    std::vector<int> t(10000), p(10000);
    for (int i = 0; i < 10000; ++i) {
        t[i] = i % 12;
        p[i] = i < 9679 ? t[i] : (t[i] + 1) % 12;
    }
    CHECK(compute_pcc(t, t) == 1.0);
    CHECK(compute_pcc(p, t) == doctest::Approx(0.9679));
    std::vector<int> wrong(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) wrong[i] = (t[i] + 5) % 12;
    CHECK(compute_pcc(wrong, t) == 0.0);
    CHECK_THROWS_AS(compute_pcc(std::vector<int>{}, std::vector<int>{}), EmptyInput);
    CHECK_THROWS_AS(compute_pcc(std::vector<int>{1}, std::vector<int>{1, 2}), ShapeMismatch);

    const ConfusionMatrix m = confusion_matrix(p, t, 12);
    long total = 0;
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) total += m[i][j];
    CHECK(total == 10000);
    CHECK(trace_ratio(m) == compute_pcc(p, t));
    const ConfusionMatrix perfect = confusion_matrix(t, t, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            if (i != j) CHECK(perfect[i][j] == 0);
    CHECK_THROWS_AS(confusion_matrix(std::vector<int>{12}, std::vector<int>{0}, 12), LabelOutOfRange);
}

TEST_CASE("report rendering") {
    CHECK(format_fixed(0.96789) == "0.9679");
    CHECK(format_fixed(-0.00001) == "0.0000");
    CHECK(format_fixed(std::nan("")) == "nan");

    MetricsReport r;
    r.title = "t";
    Table t;
    t.name = "acc";
    t.row_header = "snr_db";
    for (int s = 0; s <= 30; s += 3) {
        t.row_labels.push_back(snr_label(s));
        t.values.push_back({0.1, 0.2, 0.3, 0.4});
    }
    t.columns = {"D_R0_H0", "D_R0_H1", "D_R0_H2", "D_R0_H3"};
    r.tables.push_back(t);
    r.checks.push_back({"c", true, "d"});
    const std::string csv = render_csv(t);
    std::istringstream in(csv);
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        CHECK(std::count(line.begin(), line.end(), ',') == 4);
    }
    CHECK(lines == 12);
    CHECK(t.at("30", "D_R0_H2") == 0.3);

    const fs::path dir = scratch("report");
    emit_report(r, (dir / "a").string());
    emit_report(r, (dir / "b").string());
    for (const char* f : {"summary.txt", "acc.csv", "report.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(r.all_pass());
    r.checks.push_back({"x", false, ""});
    CHECK_FALSE(r.all_pass());
    fs::remove_all(dir);
}

TEST_CASE("config round-trips through json") {
    ExperimentConfig c;
    c.master_seed = 77;
    c.scale = Scale::full;
    c.classifier.epochs = 12;
    c.calibration.epsilon_deg = 0.5;
    c.source_receiver_mode = SourceMode::impaired;
    const ExperimentConfig r = config_from_json(to_json(c));
    CHECK(to_json(r).dump() == to_json(c).dump());
    CHECK(r.master_seed == 77);
    CHECK_FALSE(r.source_high_end());
    nlohmann::json j = to_json(c);
    j["not_a_field"] = 1;
    CHECK_THROWS(config_from_json(j));
    CHECK(to_json(config_from_json(nlohmann::json::object())).dump() == to_json(ExperimentConfig{}).dump());
}

TEST_CASE("shipped default config matches the built-in defaults") {
    const fs::path p = fs::path(RFFI_SOURCE_DIR) / "configs" / "default.json";
    CHECK(to_json(load_config(p.string())).dump() == to_json(ExperimentConfig{}).dump());
}

TEST_CASE("cli exit codes") {
    CHECK(run_cli("") == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("reproduce --table 5 --out /tmp/x") == 1);
    CHECK(run_cli("reproduce --out /tmp/x") == 1);
    CHECK(run_cli("train-tcnn --calibration /nonexistent.json --out /tmp/x.bin") == 2);
    CHECK(run_cli("gen-calibration --target R7 --out /tmp/x") == 1);
}

TEST_CASE("cli pipeline: generate, train, evaluate") {
    const fs::path dir = scratch("cli");
    ExperimentConfig c;
    c.snr_grid_db = {30};
    c.classifier.epochs = 2;
    c.tcnn.epochs = 2;
    c.calibration.pair_count = 16;
    c.calibration.batch = 200;
    {
        std::ofstream f(dir / "cfg.json");
        f << to_json(c).dump(2);
    }
    const std::string cfg = "--config " + (dir / "cfg.json").string();
    REQUIRE(run_cli("gen-datasets " + cfg + " --out " + (dir / "ds").string() + " --receivers 0 1 --channels 0") == 0);
    CHECK(fs::exists(dir / "ds" / "D_R1_H0.json"));
    REQUIRE(run_cli("gen-calibration " + cfg + " --source R0 --target R1 --out " + (dir / "cal").string()) == 0);
    REQUIRE(run_cli("train-classifier " + cfg + " --dataset " + (dir / "ds" / "D_R0_H0.json").string() +
                    " --rep ciq --out " + (dir / "cls.bin").string()) == 0);
    REQUIRE(run_cli("train-tcnn " + cfg + " --calibration " + (dir / "cal" / "C_R0_R1.json").string() + " --out " +
                    (dir / "tcnn.bin").string()) == 0);
    REQUIRE(run_cli("evaluate --classifier " + (dir / "cls.bin").string() + " --tcnn " + (dir / "tcnn.bin").string() +
                    " --dataset " + (dir / "ds" / "D_R1_H0.json").string() + " --report " + (dir / "rep").string()) == 0);
    CHECK(fs::exists(dir / "rep" / "accuracy.csv"));
    CHECK(fs::exists(dir / "rep" / "confusion_D_R1_H0_30dB.csv"));
    CHECK(run_cli("evaluate --classifier " + (dir / "tcnn.bin").string() + " --dataset " +
                  (dir / "ds" / "D_R1_H0.json").string() + " --report " + (dir / "rep2").string()) == 2);
    fs::remove_all(dir);
}
