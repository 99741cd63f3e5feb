#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dpci/data/sequence.hpp"
#include "dpci/training/config.hpp"

namespace dpci {

/// One supervision target: endpoints (m*k, (m+1)*k) of sequence `seq` and the
/// in-between frame m*k + j at t = j/k.
struct TrainingSample {
    std::size_t seq = 0;
    std::size_t pair = 0;
    std::size_t j = 0;
    std::size_t k = 0;
    double t = 0;

    std::size_t frame0() const { return pair * k; }
    std::size_t frame1() const { return (pair + 1) * k; }
    std::size_t target_frame() const { return pair * k + j; }

    std::string id() const {
        return "seq" + std::to_string(seq) + "/pair" + std::to_string(pair) + "/j" + std::to_string(j);
    }
};

/// Samples of one pass over `seq`. Without mixed training every in-between position
/// of every pair is emitted; with it, one uniformly drawn position per pair.
inline std::vector<TrainingSample> make_samples(const Sequence& seq, std::size_t seq_index, const TrainConfig& cfg,
                                                std::mt19937_64& rng) {
    cfg.validate();
    const std::size_t k = static_cast<std::size_t>(cfg.k_train);
    if (seq.num_frames() < k + 1) {
        throw DataError("make_samples: sequence '" + seq.name + "' has " + std::to_string(seq.num_frames()) +
                        " frames, k_train = " + std::to_string(k) + " needs at least " + std::to_string(k + 1));
    }
    const std::size_t pairs = (seq.num_frames() - 1) / k;
    std::vector<TrainingSample> out;
    std::uniform_int_distribution<std::size_t> pick(1, k - 1);
    for (std::size_t m = 0; m < pairs; ++m) {
        if (cfg.mixed_training) {
            const std::size_t j = pick(rng);
            out.push_back({seq_index, m, j, k, static_cast<double>(j) / static_cast<double>(k)});
        } else {
            for (std::size_t j = 1; j < k; ++j)
                out.push_back({seq_index, m, j, k, static_cast<double>(j) / static_cast<double>(k)});
        }
    }
    return out;
}

/// FNV-1a over the (seq, pair, j) stream; equal hashes mean identical sample orders.
inline std::uint64_t hash_samples(std::uint64_t h, const std::vector<TrainingSample>& samples) {
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& s : samples) {
        mix(s.seq);
        mix(s.pair);
        mix(s.j);
    }
    return h;
}

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;

}  // namespace dpci
