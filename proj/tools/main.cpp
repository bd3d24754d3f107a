// rffi: dataset generation, training, evaluation and experiment reproduction.

#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rffi/harness/experiment.hpp"

namespace fs = std::filesystem;
using namespace rffi;
using namespace rffi::harness;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kAcceptance = 3 };

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

int parse_receiver_tag(const std::string& s) {
    std::string t = s;
    if (!t.empty() && (t[0] == 'R' || t[0] == 'r')) t = t.substr(1);
    try {
        std::size_t used = 0;
        const int id = std::stoi(t, &used);
        if (used == t.size()) return id;
    } catch (const std::exception&) {
    }
    throw InvalidArgument("bad receiver id '" + s + "'");
}

ExperimentConfig config_or_default(const std::string& path, const std::string& scale, int workers) {
    ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
    if (!scale.empty()) c.scale = parse_scale(scale);
    if (workers > 0) c.workers = workers;
    c.validate();
    return c;
}

struct Common {
    std::string config;
    std::string scale;
    int workers = 0;
};

void add_common(CLI::App* sub, Common& c, bool with_scale = true) {
    sub->add_option("--config", c.config, "experiment config (JSON)");
    if (with_scale) sub->add_option("--scale", c.scale, "full|desk")->check(CLI::IsMember({"full", "desk"}));
    sub->add_option("--workers", c.workers, "generation threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Channel-robust RF fingerprint identification toolkit"};
    app.require_subcommand(1);

    Common common;

    std::string out;
    std::vector<int> only_rx, only_ch;
    auto* gen = app.add_subcommand("gen-datasets", "simulate D_Rr_Hc datasets");
    add_common(gen, common);
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--receivers", only_rx, "receiver ids (default all)");
    gen->add_option("--channels", only_ch, "channel ids (default all)");

    std::string source = "R0", target;
    auto* genc = app.add_subcommand("gen-calibration", "collect matched calibration pairs");
    add_common(genc, common, false);
    genc->add_option("--source", source, "source receiver");
    genc->add_option("--target", target, "target receiver")->required();
    genc->add_option("--out", out, "output directory")->required();

    std::string dataset, rep = "dsq";
    std::optional<double> snr;
    auto* trc = app.add_subcommand("train-classifier", "train a DSQCNN-style classifier");
    add_common(trc, common, false);
    trc->add_option("--dataset", dataset, "dataset manifest (.json)")->required();
    trc->add_option("--rep", rep, "dsq|rawiq|ciq|fft")->check(CLI::IsMember({"dsq", "rawiq", "ciq", "fft"}));
    trc->add_option("--snr", snr, "training SNR in dB (default: train_snr_db)");
    trc->add_option("--out", out, "model file")->required();

    std::string calibration;
    auto* trt = app.add_subcommand("train-tcnn", "train a calibration network");
    add_common(trt, common, false);
    trt->add_option("--calibration", calibration, "calibration manifest (.json)")->required();
    trt->add_option("--out", out, "model file")->required();

    std::string classifier, tcnn, report_dir;
    auto* ev = app.add_subcommand("evaluate", "score a classifier on a dataset's test split");
    add_common(ev, common, false);
    ev->add_option("--classifier", classifier, "classifier model")->required();
    ev->add_option("--tcnn", tcnn, "calibration model applied before the front end");
    ev->add_option("--dataset", dataset, "dataset manifest (.json)")->required();
    ev->add_option("--report", report_dir, "report directory")->required();

    int table = 0, figure = 0;
    bool check = false;
    auto* rep_cmd = app.add_subcommand("reproduce", "run one complete experiment");
    add_common(rep_cmd, common);
    auto* topt = rep_cmd->add_option("--table", table, "3 or 4")->check(CLI::IsMember({3, 4}));
    auto* fopt = rep_cmd->add_option("--figure", figure, "8 or 9")->check(CLI::IsMember({8, 9}));
    topt->excludes(fopt);
    rep_cmd->add_option("--out", out, "report directory")->required();
    rep_cmd->add_flag("--check", check, "exit 3 when an acceptance check fails");

    auto* show = app.add_subcommand("show-config", "print the resolved configuration as JSON");
    add_common(show, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*show) {
            std::cout << to_json(config_or_default(common.config, common.scale, common.workers)).dump(2) << "\n";
            return kOk;
        }
        if (*gen) {
            const ExperimentConfig c = config_or_default(common.config, common.scale, common.workers);
            fs::create_directories(out);
            for (const auto& rx : c.receivers) {
                if (!only_rx.empty() && std::find(only_rx.begin(), only_rx.end(), rx.id) == only_rx.end()) continue;
                for (const auto& ch : c.channels) {
                    if (!only_ch.empty() && std::find(only_ch.begin(), only_ch.end(), ch.id) == only_ch.end()) continue;
                    log_line("generating " + dataset_name(rx.id, ch.id));
                    save_dataset(generate_dataset(rx, ch, c), out);
                }
            }
            return kOk;
        }
        if (*genc) {
            ExperimentConfig c = config_or_default(common.config, "", common.workers);
            c.source_receiver = parse_receiver_tag(source);
            const int t = parse_receiver_tag(target);
            for (int id : {c.source_receiver, t}) {
                const bool known = std::any_of(c.receivers.begin(), c.receivers.end(), [&](const auto& r) { return r.id == id; });
                if (!known) throw InvalidArgument("no receiver R" + std::to_string(id) + " in the config");
            }
            log_line("collecting calibration pairs R" + std::to_string(c.source_receiver) + " -> R" + std::to_string(t));
            const CalibrationDataset d = generate_calibration(c, t);
            fs::create_directories(out);
            const std::string name = "C_R" + std::to_string(c.source_receiver) + "_R" + std::to_string(t);
            save_calibration(d, {{"master_seed", c.master_seed}}, out, name);
            return kOk;
        }
        if (*trc) {
            ExperimentConfig c = config_or_default(common.config, "", common.workers);
            if (snr) c.train_snr_db = *snr;
            const LabeledDataset d = load_dataset(dataset);
            ModelState m = train_enrollment_model(c, parse_rep_kind(rep), d, log_line);
            if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
            save_model(m, out);
            return kOk;
        }
        if (*trt) {
            const ExperimentConfig c = config_or_default(common.config, "", common.workers);
            const CalibrationDataset d = load_calibration(calibration);
            CalibrationResult r = train_calibration(c, d, d.target_receiver_id, log_line);
            log_line("held-out NMSE " + format_fixed(r.pre_nmse_db, 3) + " dB -> " + format_fixed(r.post_nmse_db, 3) + " dB");
            if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
            save_model(r.model, out);
            return kOk;
        }
        if (*ev) {
            const ExperimentConfig c = config_or_default(common.config, "", common.workers);
            ModelState cls = load_model(classifier);
            if (cls.kind != ModelKind::dsqcnn) throw FormatError(classifier + " is not a classifier model");
            std::optional<ModelState> cal;
            if (!tcnn.empty()) {
                cal = load_model(tcnn);
                if (cal->kind != ModelKind::tcnn) throw FormatError(tcnn + " is not a TCNN model");
            }
            const LabeledDataset d = load_dataset(dataset);
            const RepKind kind = parse_rep_kind(cls.representation);
            const DatasetEval e = evaluate_dataset(cls, d, kind, cal ? &*cal : nullptr, {}, c.workers);
            MetricsReport r;
            r.title = "Evaluation of " + fs::path(classifier).filename().string() + (cal ? " + TCNN" : "") + " on " + d.name;
            Table t;
            t.name = "accuracy";
            t.row_header = "snr_db";
            t.columns = {d.name};
            for (std::size_t i = 0; i < e.snr_db.size(); ++i) {
                t.row_labels.push_back(snr_label(e.snr_db[i]));
                t.values.push_back({e.accuracy[i]});
            }
            r.tables.push_back(t);
            for (const auto& [s, m] : e.confusion) r.confusions.emplace_back(d.name + "_" + snr_label(s) + "dB", m);
            r.scalars.emplace_back("timing_fallbacks", e.timing_fallbacks);
            emit_report(r, report_dir);
            std::cout << render_summary(r);
            return kOk;
        }
        if (*rep_cmd) {
            if (!table && !figure) {
                std::cerr << "reproduce: one of --table or --figure is required\n";
                return kUsage;
            }
            const ExperimentConfig c = config_or_default(common.config, common.scale, common.workers);
            MetricsReport r;
            if (table == 3) r = reproduce_table3(c, log_line);
            if (table == 4) r = reproduce_table4(c, log_line);
            if (figure == 8) r = reproduce_figure8(c, log_line);
            if (figure == 9) r = reproduce_figure9(c, log_line);
            emit_report(r, out);
            std::cout << render_summary(r);
            if (check && !r.all_pass()) return kAcceptance;
            return kOk;
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
