#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rffi/harness/metrics.hpp"

namespace rffi::harness {

struct Table {
    std::string name;  // file stem
    std::string row_header;
    std::vector<std::string> row_labels;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;  // [row][column]

    double at(const std::string& row, const std::string& col) const;
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct MetricsReport {
    std::string title;
    std::vector<Table> tables;
    std::vector<std::pair<std::string, ConfusionMatrix>> confusions;
    std::vector<std::pair<std::string, double>> scalars;
    std::vector<Check> checks;
    std::vector<std::string> notes;
    nlohmann::json config;

    const Table& table(const std::string& name) const;
    double scalar(const std::string& name) const;
    bool all_pass() const;
    void append(const MetricsReport& other);
};

/// Fixed-point with `decimals` places; "nan" for NaN.
std::string format_fixed(double v, int decimals = 4);

std::string render_csv(const Table& t);
std::string render_confusion_csv(const ConfusionMatrix& m);
std::string render_summary(const MetricsReport& r);
nlohmann::json report_json(const MetricsReport& r);

/// Writes summary.txt, <table>.csv, confusion_<name>.csv and report.json into dir.
void emit_report(const MetricsReport& report, const std::string& dir);

}  // namespace rffi::harness
