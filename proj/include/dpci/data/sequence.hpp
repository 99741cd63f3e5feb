#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "dpci/core/checkpoint.hpp"
#include "dpci/geometry/point_cloud.hpp"

namespace dpci {

/// Ordered frames sharing one point count, uniformly spaced in time.
struct Sequence {
    std::vector<PointCloud> frames;
    double frame_interval = 1.0;
    std::string name;

    std::size_t num_frames() const { return frames.size(); }
    std::size_t num_points() const { return frames.empty() ? 0 : frames.front().size(); }

    void validate() const {
        for (std::size_t f = 0; f < frames.size(); ++f) {
            if (frames[f].size() != num_points()) {
                throw DataError("sequence '" + name + "': frame " + std::to_string(f) + " has " +
                                std::to_string(frames[f].size()) + " points, frame 0 has " +
                                std::to_string(num_points()));
            }
            require_finite(frames[f], "sequence '" + name + "' frame " + std::to_string(f));
        }
    }
};

// .dpcs: "DPCS" | u32 version=1 | u32 num_frames | u32 num_points | frames x points x 3 f32, little-endian.
inline constexpr std::uint32_t kDpcsVersion = 1;

inline std::string encode_dpcs(const Sequence& seq) {
    seq.validate();
    std::string out = "DPCS";
    detail::put_u32(out, kDpcsVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(seq.num_frames()));
    detail::put_u32(out, static_cast<std::uint32_t>(seq.num_points()));
    out.reserve(out.size() + seq.num_frames() * seq.num_points() * 12);
    for (const auto& f : seq.frames)
        for (const auto& p : f.points)
            for (double c : p) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(c)));
    return out;
}

inline Sequence decode_dpcs(const std::string& bytes, const std::string& source) {
    detail::ByteReader r(bytes, source);
    if (r.str(4) != "DPCS") throw DataError(source + ": bad magic (expected DPCS)");
    if (auto v = r.u32(); v != kDpcsVersion) throw DataError(source + ": unsupported version " + std::to_string(v));
    const std::uint32_t nf = r.u32(), np = r.u32();
    Sequence seq;
    seq.frames.resize(nf);
    for (auto& f : seq.frames) {
        f.points.resize(np);
        for (auto& p : f.points)
            for (auto& c : p) c = static_cast<double>(r.f32());
    }
    if (!r.done()) throw DataError(source + ": trailing bytes after frame data");
    seq.validate();
    return seq;
}

namespace detail {

inline std::string xyz_frame_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu.xyz", index);
    return buf;
}

inline bool parse_coord(std::string_view tok, double& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    if (!tok.empty() && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

}  // namespace detail

/// One `x y z` triple per line; blank lines are skipped.
inline PointCloud read_xyz(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::vector<std::string_view> toks;
        std::string_view sv(line);
        std::size_t i = 0;
        while (i < sv.size()) {
            while (i < sv.size() && std::isspace(static_cast<unsigned char>(sv[i]))) ++i;
            std::size_t j = i;
            while (j < sv.size() && !std::isspace(static_cast<unsigned char>(sv[j]))) ++j;
            if (j > i) toks.push_back(sv.substr(i, j - i));
            i = j;
        }
        if (toks.empty()) continue;
        if (toks.size() != 3) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields, got " +
                            std::to_string(toks.size()));
        }
        Point3 p;
        for (int c = 0; c < 3; ++c) {
            if (!detail::parse_coord(toks[c], p[c]) || !std::isfinite(p[c])) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad coordinate '" +
                                std::string(toks[c]) + "'");
            }
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

/// Writes `x y z` lines with `digits` significant digits.
inline void write_xyz(const std::filesystem::path& path, const PointCloud& cloud, int digits = 9) {
    std::string out;
    char buf[128];
    for (const auto& p : cloud.points) {
        std::snprintf(buf, sizeof buf, "%.*g %.*g %.*g\n", digits, p[0], digits, p[1], digits, p[2]);
        out += buf;
    }
    detail::write_file_atomic(path, out);
}

/// Loads either a directory of frame_%04d.xyz files or a single .dpcs file.
inline Sequence load_sequence(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    Sequence seq;
    if (fs::is_directory(path)) {
        static const std::regex pattern(R"(frame_(\d{4,})\.xyz)");
        std::map<std::size_t, fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            std::smatch m;
            const std::string fname = entry.path().filename().string();
            if (entry.is_regular_file() && std::regex_match(fname, m, pattern)) {
                files[std::stoul(m[1].str())] = entry.path();
            }
        }
        if (files.empty()) throw DataError(path.string() + ": no frame_NNNN.xyz files");
        for (const auto& [idx, file] : files) seq.frames.push_back(read_xyz(file));
        seq.name = path.filename().string();
        if (seq.name.empty()) seq.name = path.parent_path().filename().string();
    } else {
        if (!fs::exists(path)) throw IoError(path.string() + ": no such file or directory");
        seq = decode_dpcs(detail::read_file_bytes(path), path.string());
        seq.name = path.stem().string();
    }
    seq.validate();
    return seq;
}

/// Writes `.dpcs` when the path ends in .dpcs, otherwise a directory of .xyz frames.
inline void save_sequence(const std::filesystem::path& path, const Sequence& seq) {
    namespace fs = std::filesystem;
    if (path.extension() == ".dpcs") {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        detail::write_file_atomic(path, encode_dpcs(seq));
        return;
    }
    seq.validate();
    fs::create_directories(path);
    for (std::size_t f = 0; f < seq.frames.size(); ++f) write_xyz(path / detail::xyz_frame_name(f), seq.frames[f]);
}

/// Low-temporal-resolution view of a sequence.
struct LtrSplit {
    Sequence ltr;
    std::size_t stride = 1;
    struct Heldout {
        std::size_t pair;
        std::size_t j;  // 1 .. stride-1
        double t;       // j / stride
        PointCloud frame;
    };
    std::vector<Heldout> heldout;  // ordered by (pair, j)
};

/// Keeps frames 0, k, 2k, ...; frames in between become held-out targets. Frames
/// after the last kept frame are dropped.
inline LtrSplit subsample_ltr(const Sequence& seq, std::size_t k) {
    if (k < 1) throw ArgumentError("subsample_ltr: stride must be >= 1");
    if (seq.num_frames() < k + 1) {
        throw DataError("subsample_ltr: sequence '" + seq.name + "' has " + std::to_string(seq.num_frames()) +
                        " frames, stride " + std::to_string(k) + " needs at least " + std::to_string(k + 1));
    }
    LtrSplit s;
    s.stride = k;
    s.ltr.name = seq.name;
    s.ltr.frame_interval = seq.frame_interval * static_cast<double>(k);
    const std::size_t pairs = (seq.num_frames() - 1) / k;
    for (std::size_t m = 0; m <= pairs; ++m) s.ltr.frames.push_back(seq.frames[m * k]);
    for (std::size_t m = 0; m < pairs; ++m)
        for (std::size_t j = 1; j < k; ++j)
            s.heldout.push_back({m, j, static_cast<double>(j) / static_cast<double>(k), seq.frames[m * k + j]});
    return s;
}

}  // namespace dpci
