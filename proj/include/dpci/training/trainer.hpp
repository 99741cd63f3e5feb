#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dpci/training/adam.hpp"
#include "dpci/training/loss.hpp"
#include "dpci/training/samples.hpp"

namespace dpci {

struct EpochRecord {
    int epoch = 0;  // 1-based
    double mean_loss = 0;
    double wall_ms = 0;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const IdeaNet<T>& model, const TrainConfig* train = nullptr,
                     const AdamState<T>* adam = nullptr, int epochs_done = 0) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::vector<NamedArray> arrays = model.export_state();
    if (adam) {
        const auto& params = model.params().params();
        for (std::size_t p = 0; p < params.size(); ++p) {
            const auto& [name, t] = params[p];
            arrays.push_back({"adam.m." + name, t.shape(), std::vector<float>(adam->m[p].begin(), adam->m[p].end())});
            arrays.push_back({"adam.v." + name, t.shape(), std::vector<float>(adam->v[p].begin(), adam->v[p].end())});
        }
        arrays.push_back({"train.step", {}, {static_cast<float>(adam->step)}});
        arrays.push_back({"train.epoch", {}, {static_cast<float>(epochs_done)}});
    }
    write_checkpoint(path, arrays);
    detail::write_file_atomic(config_sidecar(path), format_key_values(model.config(), train));
}

/// Builds the network described by `<path>.cfg` and loads its weights from `path`.
template <typename T>
IdeaNet<T> load_model(const std::filesystem::path& path) {
    ModelConfig mcfg;
    TrainConfig tcfg;
    apply_key_values(read_key_values(config_sidecar(path)), mcfg, tcfg);
    IdeaNet<T> net(mcfg, 0);
    net.import_state(read_checkpoint(path));
    return net;
}

template <typename T>
struct TrainResult {
    IdeaNet<T> model;
    std::vector<EpochRecord> epochs;
    std::vector<double> iteration_losses;
    std::uint64_t sample_hash = kFnvOffset;
    int loss_terms = 0;  // per sample
};

struct TrainOptions {
    std::filesystem::path out_dir;      // checkpoints and loss.csv; empty writes nothing
    std::filesystem::path resume_from;  // checkpoint to continue from
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Per-epoch generator, so resuming at an epoch reproduces the uninterrupted run.
inline std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x1dea5eedu};
    return std::mt19937_64(seq);
}

/// Mini-batch training with the dual-branch EMD objective.
///
/// Each epoch draws samples from every sequence, shuffles them, and for every batch
/// averages the per-sample losses, back-propagates and takes one Adam step. Pairs are
/// normalized per sample; the target follows the pair's transform.
template <typename T>
TrainResult<T> train(const std::vector<Sequence>& dataset, const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const TrainOptions& opt = {}) {
    namespace fs = std::filesystem;
    cfg.validate();
    if (dataset.empty()) throw DataError("train: empty dataset");
    for (const auto& s : dataset) s.validate();

    TrainResult<T> res{IdeaNet<T>(model_cfg, cfg.seed), {}, {}, kFnvOffset, 0};
    IdeaNet<T>& net = res.model;
    AdamState<T> adam = AdamState<T>::make(net.params());
    int start_epoch = 0;
    if (!opt.resume_from.empty()) {
        auto arrays = read_checkpoint(opt.resume_from);
        net.import_state(arrays);
        auto& params = net.params().params();
        auto find = [&](const std::string& name) -> const NamedArray& {
            for (const auto& a : arrays)
                if (a.name == name) return a;
            throw ConfigError(opt.resume_from.string() + " has no " + name + " entry; cannot resume");
        };
        for (std::size_t p = 0; p < params.size(); ++p) {
            const auto& m = find("adam.m." + params[p].first).data;
            const auto& v = find("adam.v." + params[p].first).data;
            adam.m[p].assign(m.begin(), m.end());
            adam.v[p].assign(v.begin(), v.end());
        }
        adam.step = static_cast<std::uint64_t>(find("train.step").data.at(0));
        start_epoch = static_cast<int>(find("train.epoch").data.at(0));
    }

    std::string csv = "epoch,mean_loss,wall_ms\n";
    const fs::path csv_path = opt.out_dir.empty() ? fs::path{} : opt.out_dir / "loss.csv";
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        if (start_epoch > 0 && fs::exists(csv_path)) {
            // Keep rows of epochs already completed.
            std::string old = detail::read_file_bytes(csv_path), kept;
            std::size_t pos = 0;
            while (pos < old.size()) {
                std::size_t nl = old.find('\n', pos);
                std::string line = old.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
                pos = nl == std::string::npos ? old.size() : nl + 1;
                if (line.empty() || line.rfind("epoch", 0) == 0) continue;
                if (std::stoi(line.substr(0, line.find(','))) <= start_epoch) kept += line + "\n";
            }
            csv += kept;
        }
        detail::write_file_atomic(csv_path, csv);
    }
    auto checkpoint = [&](const fs::path& p, int done) {
        if (!opt.out_dir.empty()) save_checkpoint(opt.out_dir / p, net, &cfg, &adam, done);
    };
    if (start_epoch == 0) checkpoint("init.idea", 0);

    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng = epoch_rng(cfg.seed, epoch);
        std::vector<TrainingSample> samples;
        for (std::size_t s = 0; s < dataset.size(); ++s) {
            auto part = make_samples(dataset[s], s, cfg, rng);
            samples.insert(samples.end(), part.begin(), part.end());
        }
        std::shuffle(samples.begin(), samples.end(), rng);
        res.sample_hash = hash_samples(res.sample_hash, samples);

        double epoch_sum = 0;
        for (std::size_t b0 = 0; b0 < samples.size(); b0 += batch) {
            const std::size_t b1 = std::min(samples.size(), b0 + batch);
            Tensor<T> total;
            double batch_sum = 0;
            for (std::size_t i = b0; i < b1; ++i) {
                const TrainingSample& s = samples[i];
                const Sequence& seq = dataset[s.seq];
                NormalizedPair np = normalize_pair(seq.frames[s.frame0()], seq.frames[s.frame1()]);
                PointCloud target = np.transform.apply(seq.frames[s.target_frame()]);
                auto out = net.forward(np.x, np.y, s.t, Mode::train);
                LossTerms<T> lt = dual_loss(out, target);
                res.loss_terms = lt.term_count;
                const double lv = static_cast<double>(lt.total.item());
                if (!std::isfinite(lv)) {
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", sample " +
                                       s.id());
                }
                batch_sum += lv;
                res.iteration_losses.push_back(lv);
                total = total.defined() ? add(total, lt.total) : lt.total;
            }
            epoch_sum += batch_sum;
            total = scale(total, T{1} / static_cast<T>(b1 - b0));
            net.params().zero_grad();
            backward(total);
            if (cfg.grad_clip > 0) clip_grad_norm(net.params(), cfg.grad_clip);
            adam_step(net.params(), adam, cfg);
        }
        EpochRecord rec{epoch + 1, samples.empty() ? 0.0 : epoch_sum / static_cast<double>(samples.size()),
                        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()};
        res.epochs.push_back(rec);
        if (!opt.out_dir.empty()) {
            char line[128];
            std::snprintf(line, sizeof line, "%d,%.17g,%.3f\n", rec.epoch, rec.mean_loss, rec.wall_ms);
            csv += line;
            detail::write_file_atomic(csv_path, csv);
        }
        if (opt.on_epoch) opt.on_epoch(rec);
        if (cfg.checkpoint_every > 0 && rec.epoch % cfg.checkpoint_every == 0) {
            checkpoint("checkpoint_epoch" + std::to_string(rec.epoch) + ".idea", rec.epoch);
        }
    }
    // A zero-epoch run leaves only the initialization checkpoint.
    if (cfg.epochs > 0) checkpoint("model.idea", std::max(cfg.epochs, start_epoch));
    net.params().zero_grad();
    return res;
}

}  // namespace dpci
