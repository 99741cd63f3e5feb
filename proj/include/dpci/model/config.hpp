#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpci/core/errors.hpp"

namespace dpci {

/// Which network wiring to build. `full` is the reference model; the others are the
/// six ablation settings.
enum class Variant {
    full,
    a_random_perm,
    b_coord_distance,
    c_no_linear,
    d_direct_regress,
    e_no_compensation,
    f_single_branch,
};

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::a_random_perm: return "a_random_perm";
        case Variant::b_coord_distance: return "b_coord_distance";
        case Variant::c_no_linear: return "c_no_linear";
        case Variant::d_direct_regress: return "d_direct_regress";
        case Variant::e_no_compensation: return "e_no_compensation";
        case Variant::f_single_branch: return "f_single_branch";
    }
    return "?";
}

/// Accepts the full names and the short forms "a".."f".
inline Variant parse_variant(const std::string& s) {
    static const std::map<std::string, Variant> table = {
        {"full", Variant::full},
        {"a", Variant::a_random_perm},         {"a_random_perm", Variant::a_random_perm},
        {"b", Variant::b_coord_distance},      {"b_coord_distance", Variant::b_coord_distance},
        {"c", Variant::c_no_linear},           {"c_no_linear", Variant::c_no_linear},
        {"d", Variant::d_direct_regress},      {"d_direct_regress", Variant::d_direct_regress},
        {"e", Variant::e_no_compensation},     {"e_no_compensation", Variant::e_no_compensation},
        {"f", Variant::f_single_branch},       {"f_single_branch", Variant::f_single_branch},
    };
    auto it = table.find(s);
    if (it == table.end()) throw ConfigError("unknown variant '" + s + "'");
    return it->second;
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::istringstream is(v);
    is.imbue(std::locale::classic());
    double d;
    std::string rest;
    if (!(is >> d) || (is >> rest)) {
        // Accept simple fractions such as "1/8".
        auto slash = v.find('/');
        if (slash != std::string::npos) {
            double num = parse_double(key, v.substr(0, slash));
            double den = parse_double(key, v.substr(slash + 1));
            if (den != 0) return num / den;
        }
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
    return d;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    double d = parse_double(key, v);
    if (d != std::floor(d)) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    return static_cast<std::int64_t>(d);
}

/// Shortest text that parses back to exactly `v`.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace detail

struct ModelConfig {
    int k_neighbors = 20;
    double width_mult = 1.0;
    double eps_dist = 1e-8;
    double eps_std = 1e-8;
    bool renormalize_transpose = false;
    bool use_norm = true;
    double norm_momentum = 0.1;
    double norm_eps = 1e-5;
    bool norm_instance_stats = false;  // eval mode also uses per-cloud statistics
    double leaky_slope = 0.2;
    bool zero_init_delta = false;  // start the compensation output layer at zero
    Variant variant = Variant::full;
    std::uint64_t perm_seed = 1;  // frozen permutation for variant a

    /// Channel width scaled by width_mult; must come out a positive integer.
    std::size_t width(std::size_t base) const {
        const double w = static_cast<double>(base) * width_mult;
        const double r = std::round(w);
        if (r < 1 || std::abs(w - r) > 1e-9) {
            throw ConfigError("width_mult " + detail::fmt_double(width_mult) + " does not scale width " +
                              std::to_string(base) + " to a positive integer");
        }
        return static_cast<std::size_t>(r);
    }

    // Reference widths of the embedding and the compensation MLP at width_mult 1.
    static constexpr std::size_t kEdgeWidths[4] = {64, 64, 128, 256};
    static constexpr std::size_t kFuseWidth = 512;
    static constexpr std::size_t kHeadWidths[3] = {512, 256, 128};
    static constexpr std::size_t kCompWidths[3] = {1152, 576, 288};

    std::size_t local_width() const { return width(kHeadWidths[2]); }
    std::size_t global_width() const { return 2 * width(kFuseWidth); }
    std::size_t feature_width() const { return local_width() + global_width(); }

    void validate() const {
        if (k_neighbors < 1) throw ConfigError("k_neighbors must be >= 1");
        if (!(width_mult > 0)) throw ConfigError("width_mult must be positive");
        for (auto w : kEdgeWidths) width(w);
        width(kFuseWidth);
        for (auto w : kHeadWidths) width(w);
        for (auto w : kCompWidths) width(w);
        if (eps_dist < 0 || eps_std < 0) throw ConfigError("eps_dist/eps_std must be non-negative");
    }

    /// Sets one field from its textual form. Returns false for unknown keys.
    bool set(const std::string& key, const std::string& v) {
        if (key == "k_neighbors") k_neighbors = static_cast<int>(detail::parse_int(key, v));
        else if (key == "width_mult") width_mult = detail::parse_double(key, v);
        else if (key == "eps_dist") eps_dist = detail::parse_double(key, v);
        else if (key == "eps_std") eps_std = detail::parse_double(key, v);
        else if (key == "renormalize_transpose") renormalize_transpose = detail::parse_bool(key, v);
        else if (key == "use_norm") use_norm = detail::parse_bool(key, v);
        else if (key == "norm_momentum") norm_momentum = detail::parse_double(key, v);
        else if (key == "norm_eps") norm_eps = detail::parse_double(key, v);
        else if (key == "norm_instance_stats") norm_instance_stats = detail::parse_bool(key, v);
        else if (key == "leaky_slope") leaky_slope = detail::parse_double(key, v);
        else if (key == "zero_init_delta") zero_init_delta = detail::parse_bool(key, v);
        else if (key == "variant") variant = parse_variant(v);
        else if (key == "perm_seed") perm_seed = static_cast<std::uint64_t>(detail::parse_int(key, v));
        else return false;
        return true;
    }

    std::vector<std::pair<std::string, std::string>> entries() const {
        return {
            {"k_neighbors", std::to_string(k_neighbors)},
            {"width_mult", detail::fmt_double(width_mult)},
            {"eps_dist", detail::fmt_double(eps_dist)},
            {"eps_std", detail::fmt_double(eps_std)},
            {"renormalize_transpose", renormalize_transpose ? "true" : "false"},
            {"use_norm", use_norm ? "true" : "false"},
            {"norm_momentum", detail::fmt_double(norm_momentum)},
            {"norm_eps", detail::fmt_double(norm_eps)},
            {"norm_instance_stats", norm_instance_stats ? "true" : "false"},
            {"leaky_slope", detail::fmt_double(leaky_slope)},
            {"zero_init_delta", zero_init_delta ? "true" : "false"},
            {"variant", variant_name(variant)},
            {"perm_seed", std::to_string(perm_seed)},
        };
    }
};

}  // namespace dpci
