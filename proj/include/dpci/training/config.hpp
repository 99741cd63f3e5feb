#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dpci/core/checkpoint.hpp"
#include "dpci/model/config.hpp"

namespace dpci {

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 1000;
    int batch_size = 14;
    int k_train = 3;
    bool mixed_training = false;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0: final checkpoint only
    double grad_clip = 0;      // max global gradient norm; 0 disables clipping

    void validate() const {
        if (k_train < 2) throw ConfigError("k_train must be >= 2 (at least one in-between frame)");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
        if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
        if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
    }

    bool set(const std::string& key, const std::string& v) {
        if (key == "learning_rate") learning_rate = detail::parse_double(key, v);
        else if (key == "beta1") beta1 = detail::parse_double(key, v);
        else if (key == "beta2") beta2 = detail::parse_double(key, v);
        else if (key == "adam_eps") adam_eps = detail::parse_double(key, v);
        else if (key == "epochs") epochs = static_cast<int>(detail::parse_int(key, v));
        else if (key == "batch_size") batch_size = static_cast<int>(detail::parse_int(key, v));
        else if (key == "k_train") k_train = static_cast<int>(detail::parse_int(key, v));
        else if (key == "mixed_training") mixed_training = detail::parse_bool(key, v);
        else if (key == "seed") seed = static_cast<std::uint64_t>(detail::parse_int(key, v));
        else if (key == "checkpoint_every") checkpoint_every = static_cast<int>(detail::parse_int(key, v));
        else if (key == "grad_clip") grad_clip = detail::parse_double(key, v);
        else return false;
        return true;
    }

    std::vector<std::pair<std::string, std::string>> entries() const {
        return {
            {"learning_rate", detail::fmt_double(learning_rate)},
            {"beta1", detail::fmt_double(beta1)},
            {"beta2", detail::fmt_double(beta2)},
            {"adam_eps", detail::fmt_double(adam_eps)},
            {"epochs", std::to_string(epochs)},
            {"batch_size", std::to_string(batch_size)},
            {"k_train", std::to_string(k_train)},
            {"mixed_training", mixed_training ? "true" : "false"},
            {"seed", std::to_string(seed)},
            {"checkpoint_every", std::to_string(checkpoint_every)},
            {"grad_clip", detail::fmt_double(grad_clip)},
        };
    }
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses UTF-8 `key = value` lines. `#` starts a comment; blank lines are ignored.
inline KeyValues parse_key_values(const std::string& text, const std::string& source) {
    KeyValues out;
    std::size_t lineno = 0, pos = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        s.erase(0, s.find_first_not_of(ws));
        s.erase(s.find_last_not_of(ws) + 1);
        return s;
    };
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
    return parse_key_values(detail::read_file_bytes(path), path.string());
}

/// Routes each key to the model or training config. Unknown keys are errors.
inline void apply_key_values(const KeyValues& kv, ModelConfig& model, TrainConfig& train) {
    for (const auto& [k, v] : kv) {
        if (!model.set(k, v) && !train.set(k, v)) throw ConfigError("unknown config key '" + k + "'");
    }
}

inline std::string format_key_values(const ModelConfig& model, const TrainConfig* train = nullptr) {
    std::string out = "# model\n";
    for (const auto& [k, v] : model.entries()) out += k + " = " + v + "\n";
    if (train) {
        out += "# training\n";
        for (const auto& [k, v] : train->entries()) out += k + " = " + v + "\n";
    }
    return out;
}

/// Sidecar written next to every checkpoint: `<checkpoint>.cfg`.
inline std::filesystem::path config_sidecar(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".cfg";
    return p;
}

}  // namespace dpci
