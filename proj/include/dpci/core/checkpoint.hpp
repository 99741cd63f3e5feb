#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dpci/core/errors.hpp"
#include "dpci/core/tensor.hpp"

namespace dpci {

/// One entry of a checkpoint: a named f32 array.
struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<float> data;

    bool operator==(const NamedArray&) const = default;
};

// Layout (all little-endian):
//   "IDEA" | u32 version=1 | u32 count |
//   count x ( u16 name_len | name bytes | u8 rank | rank x u32 dim | prod(dims) x f32 )
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string source) : b_(bytes), src_(std::move(source)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + s])) << (8 * s);
        pos_ += 4;
        return v;
    }
    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(b_[pos_]) |
                                            (static_cast<unsigned char>(b_[pos_ + 1]) << 8));
        pos_ += 2;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(b_[pos_++]);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw DataError(src_ + ": truncated at byte " + std::to_string(pos_));
    }
    const std::string& b_;
    std::string src_;
    std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<NamedArray>& arrays) {
    std::string out = "IDEA";
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
        if (a.name.size() > 0xffff) throw ArgumentError("checkpoint name too long: " + a.name.substr(0, 32));
        if (a.shape.size() > 0xff) throw ArgumentError("checkpoint rank too large for " + a.name);
        if (shape_size(a.shape) != a.data.size()) throw DimensionError("checkpoint entry " + a.name + " shape/data mismatch");
        detail::put_u16(out, static_cast<std::uint16_t>(a.name.size()));
        out += a.name;
        out.push_back(static_cast<char>(a.shape.size()));
        for (auto d : a.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (float f : a.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

inline std::vector<NamedArray> decode_checkpoint(const std::string& bytes, const std::string& source = "checkpoint") {
    detail::ByteReader r(bytes, source);
    if (r.str(4) != "IDEA") throw DataError(source + ": bad magic");
    if (auto v = r.u32(); v != kCheckpointVersion) throw DataError(source + ": unsupported version " + std::to_string(v));
    const std::uint32_t count = r.u32();
    std::vector<NamedArray> arrays;
    arrays.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = r.str(r.u16());
        const std::uint8_t rank = r.u8();
        for (std::uint8_t d = 0; d < rank; ++d) a.shape.push_back(r.u32());
        a.data.resize(shape_size(a.shape));
        for (auto& f : a.data) f = r.f32();
        arrays.push_back(std::move(a));
    }
    if (!r.done()) throw DataError(source + ": trailing bytes after " + std::to_string(count) + " entries");
    return arrays;
}

inline void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    detail::write_file_atomic(path, encode_checkpoint(arrays));
}

inline std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file_bytes(path), path.string());
}

}  // namespace dpci
