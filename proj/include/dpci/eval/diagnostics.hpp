#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dpci/core/checkpoint.hpp"

namespace dpci {

struct AlignmentSummary {
    std::size_t n = 0;
    double max_column_mass = 0;            // max_j sum_i a_ij
    double column_collision_fraction = 0;  // columns that are the row-argmax of >1 row, over N
    double colliding_row_fraction = 0;     // rows whose argmax column is shared with another row, over N
};

/// Column statistics of a row-stochastic N x N matrix. Row argmax ties go to the
/// lowest column.
template <typename T>
AlignmentSummary summarize_alignment(std::span<const T> a, std::size_t n) {
    if (a.size() != n * n) throw DimensionError("summarize_alignment: expected an N x N matrix");
    AlignmentSummary s;
    s.n = n;
    std::vector<double> mass(n, 0);
    std::vector<std::size_t> hits(n, 0), arg(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 0; j < n; ++j) {
            mass[j] += static_cast<double>(a[i * n + j]);
            if (a[i * n + j] > a[i * n + best]) best = j;
        }
        arg[i] = best;
        ++hits[best];
    }
    s.max_column_mass = n ? *std::max_element(mass.begin(), mass.end()) : 0;
    std::size_t cols = 0, rows = 0;
    for (std::size_t j = 0; j < n; ++j)
        if (hits[j] > 1) ++cols;
    for (std::size_t i = 0; i < n; ++i)
        if (hits[arg[i]] > 1) ++rows;
    if (n) {
        s.column_collision_fraction = static_cast<double>(cols) / static_cast<double>(n);
        s.colliding_row_fraction = static_cast<double>(rows) / static_cast<double>(n);
    }
    return s;
}

/// Writes <prefix>.csv (full matrix), <prefix>.pgm (8-bit P5 heatmap scaled to the
/// matrix maximum) and <prefix>_summary.txt.
template <typename T>
AlignmentSummary export_alignment_diagnostics(std::span<const T> a, std::size_t n, const std::filesystem::path& prefix) {
    AlignmentSummary s = summarize_alignment(a, n);
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
    auto with = [&](const char* suffix) {
        auto p = prefix;
        p += suffix;
        return p;
    };

    std::string csv;
    char buf[64];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, "%s%.9g", j ? "," : "", static_cast<double>(a[i * n + j]));
            csv += buf;
        }
        csv += '\n';
    }
    detail::write_file_atomic(with(".csv"), csv);

    double mx = 0;
    for (T v : a) mx = std::max(mx, static_cast<double>(v));
    std::string pgm = "P5\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
    for (T v : a) {
        const double x = mx > 0 ? static_cast<double>(v) / mx : 0.0;
        pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0))));
    }
    detail::write_file_atomic(with(".pgm"), pgm);

    std::snprintf(buf, sizeof buf, "%.9g", s.max_column_mass);
    std::string summary = "n = " + std::to_string(n) + "\nmax_column_mass = " + buf;
    std::snprintf(buf, sizeof buf, "%.9g", s.column_collision_fraction);
    summary += std::string("\ncolumn_collision_fraction = ") + buf;
    std::snprintf(buf, sizeof buf, "%.9g", s.colliding_row_fraction);
    summary += std::string("\ncolliding_row_fraction = ") + buf + "\n";
    detail::write_file_atomic(with("_summary.txt"), summary);
    return s;
}

}  // namespace dpci
