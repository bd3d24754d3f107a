#include "rffi/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rffi/types.hpp"

namespace rffi::harness {

namespace fs = std::filesystem;
using nlohmann::json;

double Table::at(const std::string& row, const std::string& col) const {
    for (std::size_t r = 0; r < row_labels.size(); ++r)
        if (row_labels[r] == row)
            for (std::size_t c = 0; c < columns.size(); ++c)
                if (columns[c] == col) return values[r][c];
    throw NotFound("no cell " + row + "/" + col + " in table " + name);
}

const Table& MetricsReport::table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return t;
    throw NotFound("no table " + name);
}

double MetricsReport::scalar(const std::string& name) const {
    for (const auto& [k, v] : scalars)
        if (k == name) return v;
    throw NotFound("no scalar " + name);
}

bool MetricsReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

void MetricsReport::append(const MetricsReport& o) {
    tables.insert(tables.end(), o.tables.begin(), o.tables.end());
    confusions.insert(confusions.end(), o.confusions.begin(), o.confusions.end());
    scalars.insert(scalars.end(), o.scalars.begin(), o.scalars.end());
    checks.insert(checks.end(), o.checks.begin(), o.checks.end());
    notes.insert(notes.end(), o.notes.begin(), o.notes.end());
}

std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    // "-0.0000" and "0.0000" are the same number.
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

std::string render_csv(const Table& t) {
    std::string out = t.row_header;
    for (const auto& c : t.columns) out += "," + c;
    out += "\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        out += t.row_labels[r];
        for (double v : t.values[r]) out += "," + format_fixed(v);
        out += "\n";
    }
    return out;
}

std::string render_confusion_csv(const ConfusionMatrix& m) {
    std::string out = "truth\\pred";
    for (std::size_t j = 0; j < m.size(); ++j) out += "," + std::to_string(j);
    out += "\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += std::to_string(i);
        for (long v : m[i]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

std::string render_summary(const MetricsReport& r) {
    std::string out = r.title + "\n";
    out += std::string(r.title.size(), '=') + "\n\n";
    for (const auto& t : r.tables) {
        out += "[" + t.name + "]\n";
        std::size_t w = t.row_header.size();
        for (const auto& l : t.row_labels) w = std::max(w, l.size());
        auto pad = [](std::string s, std::size_t n) {
            s.resize(std::max(n, s.size()), ' ');
            return s;
        };
        out += pad(t.row_header, w);
        for (const auto& c : t.columns) out += "  " + pad(c, 9);
        out += "\n";
        for (std::size_t i = 0; i < t.row_labels.size(); ++i) {
            out += pad(t.row_labels[i], w);
            for (std::size_t c = 0; c < t.columns.size(); ++c)
                out += "  " + pad(format_fixed(t.values[i][c]), std::max<std::size_t>(9, t.columns[c].size()));
            out += "\n";
        }
        out += "\n";
    }
    if (!r.scalars.empty()) {
        for (const auto& [k, v] : r.scalars) out += k + " = " + format_fixed(v) + "\n";
        out += "\n";
    }
    for (const auto& n : r.notes) out += "note: " + n + "\n";
    if (!r.notes.empty()) out += "\n";
    for (const auto& c : r.checks) out += std::string(c.pass ? "PASS " : "FAIL ") + c.name + "  " + c.detail + "\n";
    return out;
}

json report_json(const MetricsReport& r) {
    json tables = json::array();
    for (const auto& t : r.tables) {
        json rows = json::array();
        for (std::size_t i = 0; i < t.row_labels.size(); ++i) {
            json cells = json::object();
            for (std::size_t c = 0; c < t.columns.size(); ++c) cells[t.columns[c]] = format_fixed(t.values[i][c]);
            rows.push_back({{t.row_header, t.row_labels[i]}, {"values", cells}});
        }
        tables.push_back({{"name", t.name}, {"rows", rows}});
    }
    json scalars = json::object();
    for (const auto& [k, v] : r.scalars) scalars[k] = format_fixed(v);
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return {{"title", r.title}, {"tables", tables},   {"scalars", scalars},
            {"checks", checks}, {"notes", r.notes}, {"config", r.config}};
}

namespace {

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream o(p, std::ios::binary);
    if (!o) throw IoError("cannot write " + p.string());
    o << text;
    if (!o) throw IoError("write failed: " + p.string());
}

}  // namespace

void emit_report(const MetricsReport& report, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    write_file(fs::path(dir) / "summary.txt", render_summary(report));
    for (const auto& t : report.tables) write_file(fs::path(dir) / (t.name + ".csv"), render_csv(t));
    for (const auto& [name, m] : report.confusions)
        write_file(fs::path(dir) / ("confusion_" + name + ".csv"), render_confusion_csv(m));
    write_file(fs::path(dir) / "report.json", report_json(report).dump(2) + "\n");
}

}  // namespace rffi::harness
