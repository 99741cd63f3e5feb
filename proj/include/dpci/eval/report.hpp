#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpci/core/checkpoint.hpp"

namespace dpci {

struct EvalRow {
    std::size_t pair = 0;
    std::size_t j = 0;
    double t = 0;
    double emd = 0;
    double cd = 0;

    bool operator==(const EvalRow&) const = default;
};

inline constexpr const char* kEmdConvention = "mean_matched_euclidean";
inline constexpr const char* kCdConvention = "squared_nn_mean_both_directions";

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_emd = std::numeric_limits<double>::quiet_NaN();
    double mean_cd = std::numeric_limits<double>::quiet_NaN();
    std::size_t k_test = 0;
    std::string checkpoint_id;

    /// Aggregates as arithmetic means of the rows (NaN when there are none).
    void recompute() {
        if (rows.empty()) {
            mean_emd = mean_cd = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        double e = 0, c = 0;
        for (const auto& r : rows) {
            e += r.emd;
            c += r.cd;
        }
        mean_emd = e / static_cast<double>(rows.size());
        mean_cd = c / static_cast<double>(rows.size());
    }
};

struct ReportFormat {
    bool per_mille = false;  // write metrics in units of 1e-3
    bool metadata = true;    // trailing #meta lines
};

namespace detail {
inline std::string fmt9(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}
}  // namespace detail

/// CSV: header `pair,j,t,emd,cd`, one row per held-out frame, then `#mean,<emd>,<cd>`
/// and optional `#meta,key=value` lines.
inline std::string format_report(const EvalReport& r, const ReportFormat& fmt = {}) {
    const double u = fmt.per_mille ? 1e3 : 1.0;
    std::string out = "pair,j,t,emd,cd\n";
    for (const auto& row : r.rows) {
        out += std::to_string(row.pair) + "," + std::to_string(row.j) + "," + detail::fmt9(row.t) + "," +
               detail::fmt9(row.emd * u) + "," + detail::fmt9(row.cd * u) + "\n";
    }
    out += "#mean," + detail::fmt9(r.mean_emd * u) + "," + detail::fmt9(r.mean_cd * u) + "\n";
    if (fmt.metadata) {
        out += "#meta,k_test=" + std::to_string(r.k_test) + "\n";
        if (!r.checkpoint_id.empty()) out += "#meta,checkpoint=" + r.checkpoint_id + "\n";
        out += std::string("#meta,emd=") + kEmdConvention + "\n";
        out += std::string("#meta,cd=") + kCdConvention + "\n";
        out += std::string("#meta,units=") + (fmt.per_mille ? "1e-3" : "1") + "\n";
    }
    return out;
}

inline void write_report(const EvalReport& r, const std::filesystem::path& path, const ReportFormat& fmt = {}) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    detail::write_file_atomic(path, format_report(r, fmt));
}

inline EvalReport parse_report(const std::string& text, const std::string& source = "report") {
    EvalReport r;
    std::vector<std::string> lines;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);)
        if (!line.empty()) lines.push_back(line);
    if (lines.empty() || lines[0] != "pair,j,t,emd,cd") throw DataError(source + ": missing header");
    auto split = [](const std::string& s) {
        std::vector<std::string> f;
        std::stringstream ss(s);
        for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
        return f;
    };
    auto num = [&](const std::string& s, std::size_t lineno) {
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0') throw DataError(source + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
        return v;
    };
    double unit = 1.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].rfind("#meta,", 0) == 0) {
            std::string kv = lines[i].substr(6);
            auto eq = kv.find('=');
            std::string k = kv.substr(0, eq), v = eq == std::string::npos ? "" : kv.substr(eq + 1);
            if (k == "k_test") r.k_test = std::stoul(v);
            else if (k == "checkpoint") r.checkpoint_id = v;
            else if (k == "units") unit = v == "1e-3" ? 1e-3 : 1.0;
        }
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto f = split(lines[i]);
        if (lines[i].rfind("#meta,", 0) == 0) continue;
        if (lines[i].rfind("#mean,", 0) == 0) {
            if (f.size() != 3) throw DataError(source + ":" + std::to_string(i + 1) + ": malformed #mean line");
            r.mean_emd = num(f[1], i + 1) * unit;
            r.mean_cd = num(f[2], i + 1) * unit;
            continue;
        }
        if (f.size() != 5) throw DataError(source + ":" + std::to_string(i + 1) + ": expected 5 fields");
        r.rows.push_back({std::stoul(f[0]), std::stoul(f[1]), num(f[2], i + 1), num(f[3], i + 1) * unit,
                          num(f[4], i + 1) * unit});
    }
    return r;
}

inline EvalReport read_report(const std::filesystem::path& path) {
    return parse_report(detail::read_file_bytes(path), path.string());
}

}  // namespace dpci
