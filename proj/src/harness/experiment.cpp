#include "rffi/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rffi/rng.hpp"

namespace rffi::harness {

namespace {

void say(const Log& log, const std::string& s) {
    if (log) log(s);
}

std::string receiver_tag(int id) { return "R" + std::to_string(id); }

const std::vector<RepKind>& table3_kinds() {
    static const std::vector<RepKind> k = {RepKind::ciq, RepKind::fft, RepKind::rawiq, RepKind::dsq};
    return k;
}

std::vector<int> all_channels(const ExperimentConfig& c) {
    std::vector<int> ids;
    for (const auto& ch : c.channels) ids.push_back(ch.id);
    return ids;
}

Table snr_table(const std::string& name, const std::vector<double>& snrs) {
    Table t;
    t.name = name;
    t.row_header = "snr_db";
    for (double s : snrs) t.row_labels.push_back(snr_label(s));
    t.values.assign(snrs.size(), {});
    return t;
}

void add_column(Table& t, const DatasetEval& e) {
    t.columns.push_back(e.name);
    for (std::size_t i = 0; i < e.accuracy.size(); ++i) t.values[i].push_back(e.accuracy[i]);
}

}  // namespace

std::string snr_label(double snr) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", snr);
    return buf;
}

ClassifierData representations_for(const LabeledDataset& d, const std::vector<std::size_t>& idx, RepKind kind,
                                   ModelState* tcnn, int workers, int* fallbacks) {
    std::vector<Representation> reps(idx.size());
    std::vector<int> labels(idx.size());
    std::vector<char> fb(idx.size(), 0);
    std::vector<ModelState> clones;
    if (tcnn && workers > 1)
        for (int w = 0; w < workers; ++w) clones.push_back(tcnn->clone());
    parallel_for(idx.size(), workers, [&](std::size_t i, int w) {
        const ComplexFrame& raw = d.frames[idx[i]];
        FrontendTrace trace;
        if (tcnn) {
            ModelState& m = clones.empty() ? *tcnn : clones[static_cast<std::size_t>(w)];
            reps[i] = build_representation(calibrate_sequence(m, raw), kind, {}, &trace);
        } else {
            reps[i] = build_representation(raw, kind, {}, &trace);
        }
        fb[i] = trace.used_fallback;
        labels[i] = d.records[idx[i]].tx;
    });
    if (fallbacks) *fallbacks += static_cast<int>(std::count(fb.begin(), fb.end(), 1));
    return make_classifier_data(reps, labels);
}

DatasetEval evaluate_dataset(ModelState& classifier, const LabeledDataset& d, RepKind kind, ModelState* tcnn,
                             const std::vector<double>& snrs, int workers) {
    DatasetEval e;
    e.name = d.name;
    e.snr_db = snrs.empty() ? d.snr_grid_db : snrs;
    for (double s : e.snr_db) {
        const auto idx = d.select(Split::test, &s);
        if (idx.empty()) throw EmptyDataset("no test records at " + snr_label(s) + " dB in " + d.name);
        const ClassifierData data = representations_for(d, idx, kind, tcnn, workers, &e.timing_fallbacks);
        const auto pred = predict_labels(classifier, data.x);
        e.accuracy.push_back(compute_pcc(pred, data.labels));
        e.confusion[s] = confusion_matrix(pred, data.labels, classifier.classifier.classes);
    }
    return e;
}

ModelState train_enrollment_model(const ExperimentConfig& config, RepKind kind, const LabeledDataset& source_h0,
                                  const Log& log) {
    const double snr = config.train_snr_db;
    const auto tr = source_h0.select(Split::train, &snr);
    const auto va = source_h0.select(Split::val, &snr);
    const ClassifierData train = representations_for(source_h0, tr, kind, nullptr, config.workers);
    const ClassifierData val = representations_for(source_h0, va, kind, nullptr, config.workers);
    ClassifierConfig cc = config.classifier;
    cc.input_len = rep_length(kind);
    const auto k = static_cast<std::uint64_t>(kind);
    ModelState m = build_dsqcnn(cc, derive_seed({config.master_seed, 0xc1a, k}));
    m.representation = to_string(kind);
    ClassifierTrainOptions opts;
    opts.shuffle_seed = derive_seed({config.master_seed, 0x5f1, k});
    if (config.select_best_validation) opts.validation = &val;
    opts.on_epoch = [&](int epoch, double loss) {
        if (epoch % 50 == 0) say(log, "  " + to_string(kind) + " epoch " + std::to_string(epoch) + " loss " + format_fixed(loss));
    };
    say(log, "training " + to_string(kind) + " classifier on " + std::to_string(train.size()) + " records");
    train_classifier(m, train, cc, opts);
    return m;
}

EnrollmentResult run_enrollment(const ExperimentConfig& config, RepKind kind, const std::vector<int>& channels,
                                const std::vector<double>& snrs, const Log& log) {
    const ReceiverProfile& rx = config.receiver(config.source_receiver);
    const LabeledDataset h0 = generate_dataset(rx, config.channel(config.channels.front().id), config);
    EnrollmentResult r{train_enrollment_model(config, kind, h0, log), kind, {}, {}};
    const auto grid = snrs.empty() ? config.snr_grid_db : snrs;
    Table t = snr_table("accuracy_" + to_string(kind), grid);
    for (int ch : channels) {
        const bool reuse = ch == h0.channel_id;
        const LabeledDataset other = reuse ? LabeledDataset{} : generate_dataset(rx, config.channel(ch), config);
        const LabeledDataset& d = reuse ? h0 : other;
        say(log, "evaluating " + to_string(kind) + " on " + d.name);
        DatasetEval e = evaluate_dataset(r.model, d, kind, nullptr, grid, config.workers);
        add_column(t, e);
        if (e.confusion.count(config.train_snr_db))
            r.report.confusions.emplace_back(to_string(kind) + "_" + d.name + "_" + snr_label(config.train_snr_db) + "dB",
                                             e.confusion.at(config.train_snr_db));
        r.report.scalars.emplace_back(to_string(kind) + "_" + d.name + "_timing_fallbacks", e.timing_fallbacks);
        r.evals.push_back(std::move(e));
    }
    r.report.tables.push_back(std::move(t));
    r.report.scalars.emplace_back(to_string(kind) + "_best_epoch", r.model.best_epoch);
    r.report.scalars.emplace_back(to_string(kind) + "_final_train_loss", r.model.loss_history.empty() ? NAN : r.model.loss_history.back());
    return r;
}

MetricsReport run_cross_receiver(const ExperimentConfig& config, ModelState& classifier, RepKind kind,
                                 const std::map<int, ModelState*>& tcnn, const std::vector<int>& targets,
                                 const std::vector<int>& channels, const std::vector<double>& snrs,
                                 const std::string& table_name, const Log& log) {
    MetricsReport r;
    const auto grid = snrs.empty() ? config.snr_grid_db : snrs;
    Table t = snr_table(table_name, grid);
    for (int rx : targets)
        for (int ch : channels) {
            const LabeledDataset d = generate_dataset(config.receiver(rx), config.channel(ch), config);
            ModelState* cal = nullptr;
            if (!tcnn.empty()) cal = tcnn.at(rx);
            say(log, "evaluating " + to_string(kind) + (cal ? " with TCNN" : "") + " on " + d.name);
            DatasetEval e = evaluate_dataset(classifier, d, kind, cal, grid, config.workers);
            add_column(t, e);
            if (e.confusion.count(config.train_snr_db))
                r.confusions.emplace_back(table_name + "_" + d.name + "_" + snr_label(config.train_snr_db) + "dB",
                                          e.confusion.at(config.train_snr_db));
        }
    r.tables.push_back(std::move(t));
    return r;
}

CalibrationBuildOptions calibration_options(const ExperimentConfig& config) {
    const auto& c = config.calibration;
    CalibrationBuildOptions o;
    o.want = static_cast<std::size_t>(c.pair_count);
    o.batch = static_cast<std::size_t>(c.batch);
    o.epsilon_deg = c.epsilon_deg;
    o.source_opts = {c.snr_db, c.max_residual_cfo_hz, config.source_high_end(), c.remove_cfo};
    o.target_opts = {c.snr_db, c.max_residual_cfo_hz, false, c.remove_cfo};
    return o;
}

CalibrationDataset generate_calibration(const ExperimentConfig& config, int target_receiver) {
    CalibrationDataset d =
        build_calibration_dataset(config.receiver(config.source_receiver), config.receiver(target_receiver),
                                  derive_seed({config.master_seed, 0xca1, static_cast<std::uint64_t>(target_receiver)}),
                                  calibration_options(config));
    return std::move(to_float_precision(d));
}

CalibrationResult train_calibration(const ExperimentConfig& config, CalibrationDataset data, int target_receiver,
                                    const Log& log) {
    const auto parts = split_calibration_indices(data.size(), config.split_ratios);
    const CalibrationDataset train = subset(data, parts[0]);
    const CalibrationDataset test = subset(data, parts[2]);
    const auto t = static_cast<std::uint64_t>(target_receiver);
    CalibrationResult r{build_tcnn(config.tcnn, derive_seed({config.master_seed, 0x7c, t})), std::move(data), train.size(),
                        test.size(), 0.0, 0.0};
    TcnnTrainOptions opts;
    opts.shuffle_seed = derive_seed({config.master_seed, 0x7c5, t});
    opts.on_epoch = [&](int epoch, double loss) {
        if (epoch % 25 == 0)
            say(log, "  TCNN " + receiver_tag(target_receiver) + " epoch " + std::to_string(epoch) + " loss " + format_fixed(loss, 8));
    };
    say(log, "training TCNN for " + receiver_tag(target_receiver) + " on " + std::to_string(train.size()) + " pairs");
    train_tcnn(r.model, train, config.tcnn, opts);
    r.pre_nmse_db = compute_nmse(test.targets, test.sources);
    std::vector<ComplexFrame> mapped;
    for (const auto& f : test.targets) mapped.push_back(calibrate_sequence(r.model, f));
    r.post_nmse_db = compute_nmse(mapped, test.sources);
    return r;
}

CalibrationResult run_calibration(const ExperimentConfig& config, int target_receiver, const Log& log) {
    say(log, "collecting calibration responses for " + receiver_tag(target_receiver));
    return train_calibration(config, generate_calibration(config, target_receiver), target_receiver, log);
}

// ---- checks ----

std::vector<Check> check_channel_robustness(const Table& acc, double snr, const Thresholds& th) {
    const std::string row = snr_label(snr);
    double lo = 1.0, hi = 0.0;
    std::string detail;
    for (const auto& c : acc.columns) {
        const double v = acc.at(row, c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        detail += c + "=" + format_fixed(v) + " ";
    }
    return {{"same-receiver accuracy >= " + format_fixed(th.same_receiver_min, 2) + " on every channel at " + row + " dB",
             lo >= th.same_receiver_min, detail},
            {"cross-channel spread <= " + format_fixed(100 * th.channel_spread_max, 0) + " points at " + row + " dB",
             hi - lo <= th.channel_spread_max + 1e-12, "spread=" + format_fixed(100 * (hi - lo), 2) + " points"}};
}

std::vector<Check> check_baseline_contrast(const Table& acc, const std::string& kind, double snr, const Thresholds& th) {
    const std::string row = snr_label(snr);
    auto col = [&](const std::string& suffix) -> std::string {
        for (const auto& c : acc.columns)
            if (c.size() >= suffix.size() && c.compare(c.size() - suffix.size(), suffix.size(), suffix) == 0) return c;
        throw NotFound("no column ending in " + suffix);
    };
    const double h0 = acc.at(row, col("_H0"));
    std::vector<Check> out;
    for (const char* s : {"_H2", "_H3"}) {
        const double v = acc.at(row, col(s));
        out.push_back({kind + " loses >= " + format_fixed(100 * th.baseline_drop_min, 0) + " points on" + std::string(s) +
                           " vs H0 at " + row + " dB",
                       h0 - v >= th.baseline_drop_min,
                       "H0=" + format_fixed(h0) + " " + std::string(s + 1) + "=" + format_fixed(v) +
                           " drop=" + format_fixed(100 * (h0 - v), 2) + " points"});
    }
    return out;
}

std::vector<Check> check_cross_receiver_drop(double same, double r1, double r2, const Thresholds& th) {
    const double d1 = same - r1, d2 = same - r2;
    const std::string lim = format_fixed(100 * th.cross_drop_min, 0);
    return {{"direct deployment on R1 drops >= " + lim + " points", d1 >= th.cross_drop_min,
             "same=" + format_fixed(same) + " R1=" + format_fixed(r1) + " drop=" + format_fixed(100 * d1, 2)},
            {"direct deployment on R2 drops >= " + lim + " points", d2 >= th.cross_drop_min,
             "same=" + format_fixed(same) + " R2=" + format_fixed(r2) + " drop=" + format_fixed(100 * d2, 2)},
            {"R2 drop larger than R1 drop", d2 > d1,
             "R1 drop=" + format_fixed(100 * d1, 2) + " R2 drop=" + format_fixed(100 * d2, 2)}};
}

std::vector<Check> check_nmse(double pre1, double post1, double pre2, double post2, const Thresholds& th) {
    return {{"pre-calibration NMSE R0/R1 within +-2 dB of -21.2", std::abs(pre1 - th.nmse_pre_r1) <= th.nmse_band,
             format_fixed(pre1, 3) + " dB"},
            {"pre-calibration NMSE R0/R2 within +-2 dB of -17.9", std::abs(pre2 - th.nmse_pre_r2) <= th.nmse_band,
             format_fixed(pre2, 3) + " dB"},
            {"post-calibration NMSE R0/R1 <= -28 dB", post1 <= th.nmse_post_max, format_fixed(post1, 3) + " dB"},
            {"post-calibration NMSE R0/R2 <= -28 dB", post2 <= th.nmse_post_max, format_fixed(post2, 3) + " dB"}};
}

std::vector<Check> check_recovery(const Table& same, const Table& tcnn, const Thresholds& th) {
    std::vector<Check> out;
    for (const auto& c : tcnn.columns) {
        const double a24 = tcnn.at("24", c);
        out.push_back({"TCNN+DSQCNN >= " + format_fixed(th.recovery_min_24db, 2) + " at 24 dB on " + c,
                       a24 >= th.recovery_min_24db, format_fixed(a24)});
        // Same channel, source receiver.
        const std::string ch = c.substr(c.rfind('_'));
        std::string ref;
        for (const auto& s : same.columns)
            if (s.size() >= ch.size() && s.compare(s.size() - ch.size(), ch.size(), ch) == 0) ref = s;
        const double a30 = tcnn.at("30", c), r30 = same.at("30", ref);
        out.push_back({"TCNN+DSQCNN within " + format_fixed(100 * th.recovery_gap_max, 0) + " points of " + ref + " at 30 dB on " + c,
                       r30 - a30 <= th.recovery_gap_max + 1e-12,
                       c + "=" + format_fixed(a30) + " " + ref + "=" + format_fixed(r30)});
    }
    return out;
}

// ---- reproduce ----

MetricsReport reproduce_table3(const ExperimentConfig& config, const Log& log) {
    MetricsReport r;
    r.title = "Table III: accuracy when directly deployed on other receivers (" + to_string(config.scale) + " scale)";
    r.config = to_json(config);
    const double snr = config.train_snr_db;
    const int ch0 = config.channels.front().id;
    const LabeledDataset same = generate_dataset(config.receiver(config.source_receiver), config.channel(ch0), config);
    std::vector<LabeledDataset> others;
    for (int t : config.target_receivers) others.push_back(generate_dataset(config.receiver(t), config.channel(ch0), config));

    Table t;
    t.name = "table3";
    t.row_header = "method";
    t.columns.push_back(same.name);
    for (const auto& d : others) {
        t.columns.push_back(d.name);
        t.columns.push_back("drop_" + receiver_tag(d.receiver_id));
    }
    for (RepKind k : table3_kinds()) {
        ModelState m = train_enrollment_model(config, k, same, log);
        const double a0 = evaluate_dataset(m, same, k, nullptr, {snr}, config.workers).accuracy[0];
        std::vector<double> row = {a0};
        for (const auto& d : others) {
            say(log, "evaluating " + to_string(k) + " on " + d.name);
            const double a = evaluate_dataset(m, d, k, nullptr, {snr}, config.workers).accuracy[0];
            row.push_back(a);
            row.push_back(a0 - a);
        }
        t.row_labels.push_back(to_string(k) + "cnn");
        t.values.push_back(row);
    }
    r.tables.push_back(t);
    const double same_dsq = t.at("dsqcnn", same.name);
    r.checks.push_back({"DSQCNN same-receiver accuracy >= 0.88 at " + snr_label(snr) + " dB", same_dsq >= Thresholds{}.same_receiver_min,
                        format_fixed(same_dsq)});
    if (others.size() >= 2) {
        const auto c = check_cross_receiver_drop(same_dsq, t.at("dsqcnn", others[0].name), t.at("dsqcnn", others[1].name));
        r.checks.insert(r.checks.end(), c.begin(), c.end());
    }
    r.notes.push_back("accuracy on the test split at " + snr_label(snr) + " dB; drop columns are same-receiver minus target");
    return r;
}

MetricsReport reproduce_table4(const ExperimentConfig& config, const Log& log) {
    MetricsReport r;
    r.title = "Table IV: NMSE with and without TCNN on held-out calibration pairs";
    r.config = to_json(config);
    Table t;
    t.name = "table4";
    t.row_header = "strategy";
    t.row_labels = {"without_tcnn", "with_tcnn"};
    t.values.assign(2, {});
    std::map<int, CalibrationResult> res;
    for (int target : config.target_receivers) {
        CalibrationResult c = run_calibration(config, target, log);
        t.columns.push_back("C_" + receiver_tag(config.source_receiver) + "_" + receiver_tag(target));
        t.values[0].push_back(c.pre_nmse_db);
        t.values[1].push_back(c.post_nmse_db);
        r.scalars.emplace_back("test_pairs_" + receiver_tag(target), static_cast<double>(c.test_pairs));
        res.emplace(target, std::move(c));
    }
    r.tables.push_back(t);
    if (res.count(1) && res.count(2)) {
        const auto c = check_nmse(res.at(1).pre_nmse_db, res.at(1).post_nmse_db, res.at(2).pre_nmse_db, res.at(2).post_nmse_db);
        r.checks.insert(r.checks.end(), c.begin(), c.end());
    }
    r.notes.push_back("NMSE in dB, mean of per-pair values over the test split");
    return r;
}

MetricsReport reproduce_figure8(const ExperimentConfig& config, const Log& log) {
    MetricsReport r;
    r.title = "Figure 8: accuracy vs SNR on the source receiver across channels (" + to_string(config.scale) + " scale)";
    r.config = to_json(config);
    const auto chans = all_channels(config);
    for (RepKind k : {RepKind::dsq, RepKind::ciq, RepKind::rawiq, RepKind::fft}) {
        EnrollmentResult e = run_enrollment(config, k, chans, {}, log);
        r.append(e.report);
        if (k == RepKind::dsq) {
            const auto c = check_channel_robustness(e.report.tables.front(), config.train_snr_db);
            r.checks.insert(r.checks.end(), c.begin(), c.end());
        }
        if (k == RepKind::ciq || k == RepKind::rawiq) {
            const auto c = check_baseline_contrast(e.report.tables.front(), to_string(k), config.train_snr_db);
            r.checks.insert(r.checks.end(), c.begin(), c.end());
        }
    }
    return r;
}

MetricsReport reproduce_figure9(const ExperimentConfig& config, const Log& log) {
    MetricsReport r;
    r.title = "Figure 9: TCNN-calibrated accuracy vs SNR on the target receivers (" + to_string(config.scale) + " scale)";
    r.config = to_json(config);
    const auto chans = all_channels(config);
    EnrollmentResult e = run_enrollment(config, RepKind::dsq, chans, {}, log);
    r.append(e.report);
    std::map<int, CalibrationResult> cal;
    std::map<int, ModelState*> tc;
    for (int t : config.target_receivers) {
        cal.emplace(t, run_calibration(config, t, log));
        r.scalars.emplace_back("nmse_pre_" + receiver_tag(t), cal.at(t).pre_nmse_db);
        r.scalars.emplace_back("nmse_post_" + receiver_tag(t), cal.at(t).post_nmse_db);
    }
    for (auto& [k, v] : cal) tc[k] = &v.model;
    r.append(run_cross_receiver(config, e.model, RepKind::dsq, {}, config.target_receivers, chans, {}, "accuracy_direct", log));
    r.append(run_cross_receiver(config, e.model, RepKind::dsq, tc, config.target_receivers, chans, {}, "accuracy_tcnn", log));
    const auto c = check_recovery(r.table("accuracy_dsq"), r.table("accuracy_tcnn"));
    r.checks.insert(r.checks.end(), c.begin(), c.end());
    return r;
}

}  // namespace rffi::harness
