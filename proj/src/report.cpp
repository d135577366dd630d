#include "chaosbench/io.hpp"

#include <cstdio>
#include <sstream>

namespace chaosbench {

namespace {

const char* const kMetrics[] = {"vpt_lyap", "smape_mean", "d_frac_error", "d_stsp", "context_overlap"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

std::string format_table(const SummaryTable& table, const std::string& format) {
    if (format != "csv" && format != "md") throw InvalidArgument("report format must be csv or md");
    std::vector<std::string> header = table.group_keys;
    header.push_back("n_ok");
    header.push_back("n_failed");
    for (const char* m : kMetrics) {
        header.push_back(std::string(m) + "_median");
        header.push_back(std::string(m) + "_se");
    }

    std::vector<std::vector<std::string>> rows;
    for (const auto& r : table.rows) {
        std::vector<std::string> cells = r.key;
        cells.push_back(std::to_string(r.n_ok));
        cells.push_back(std::to_string(r.n_failed));
        for (const char* m : kMetrics) {
            auto it = r.metrics.find(m);
            cells.push_back(it == r.metrics.end() ? "" : num(it->second.median));
            cells.push_back(it == r.metrics.end() ? "" : num(it->second.standard_error));
        }
        rows.push_back(std::move(cells));
    }

    std::ostringstream out;
    if (format == "csv") {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_cell(cells[i]);
            out << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
    } else {
        auto line = [&](const std::vector<std::string>& cells) {
            out << '|';
            for (const auto& c : cells) out << ' ' << (c.empty() ? "-" : c) << " |";
            out << '\n';
        };
        line(header);
        out << '|';
        for (std::size_t i = 0; i < header.size(); ++i) out << " --- |";
        out << '\n';
        for (const auto& r : rows) line(r);
    }
    return out.str();
}

std::string format_curves(const SummaryTable& table, double dt_lyap) {
    std::ostringstream out;
    for (const auto& k : table.group_keys) out << csv_cell(k) << ',';
    out << "horizon,t_lyap,median_smape\n";
    for (const auto& r : table.rows) {
        std::string prefix;
        for (const auto& k : r.key) prefix += csv_cell(k) + ",";
        for (Index t = 0; t < r.median_smape_curve.size(); ++t)
            out << prefix << (t + 1) << ',' << num(static_cast<double>(t + 1) * dt_lyap) << ','
                << num(r.median_smape_curve(t)) << '\n';
    }
    return out.str();
}

}  // namespace chaosbench
