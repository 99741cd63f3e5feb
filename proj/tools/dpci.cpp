// dpci: synthetic data, training, interpolation, evaluation, ablations and
// gradient checking for the point-cloud interpolation network.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "dpci/dpci.hpp"

namespace fs = std::filesystem;
using namespace dpci;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kNumeric = 4, kCheck = 5 };

/// Flags that map onto ModelConfig/TrainConfig keys. Values stay textual so the
/// config file and the flag go through the same parser; a flag only overrides the
/// file when it was given.
class KeyFlags {
public:
    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& def,
             const std::string& help, const char* type = nullptr) {
        auto& slot = values_[key];
        slot = def;
        if (!type) type = def == "true" || def == "false" ? "BOOL" : def.find_first_of(".e") != std::string::npos ? "FLOAT" : "INT";
        options_.emplace_back(app->add_option(flag, slot, help)->default_str(def)->type_name(type), key);
    }
    void add_switch(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto& slot = switches_[key];
        options_.emplace_back(app->add_flag(flag, slot, help), key);
    }

    void apply(const std::string& config_path, ModelConfig& model, TrainConfig& train) const {
        if (!config_path.empty()) apply_key_values(read_key_values(config_path), model, train);
        KeyValues kv;
        for (const auto& [opt, key] : options_) {
            if (opt->count() == 0) continue;
            if (auto it = switches_.find(key); it != switches_.end()) kv.emplace_back(key, it->second ? "true" : "false");
            else kv.emplace_back(key, values_.at(key));
        }
        apply_key_values(kv, model, train);
    }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> switches_;
    std::vector<std::pair<CLI::Option*, std::string>> options_;
};

void add_model_flags(CLI::App* app, KeyFlags& f) {
    const ModelConfig d;
    f.add(app, "--width-mult", "width_mult", detail::fmt_double(d.width_mult),
          "channel width multiplier (e.g. 0.125 or 1/8)", "FLOAT");
    f.add(app, "--k-neighbors", "k_neighbors", std::to_string(d.k_neighbors), "EdgeConv neighbourhood size");
    f.add(app, "--use-norm", "use_norm", d.use_norm ? "true" : "false", "channel normalization after each linear map");
    f.add(app, "--norm-instance-stats", "norm_instance_stats", d.norm_instance_stats ? "true" : "false",
          "normalize by per-cloud statistics at inference too");
    f.add(app, "--zero-init-delta", "zero_init_delta", d.zero_init_delta ? "true" : "false",
          "initialize the increment output layer to zero");
    f.add(app, "--renormalize-transpose", "renormalize_transpose", d.renormalize_transpose ? "true" : "false",
          "rescale rows of A^T to sum to one");
    f.add(app, "--perm-seed", "perm_seed", std::to_string(d.perm_seed), "seed of the frozen permutation (variant a)");
}

void add_train_flags(CLI::App* app, KeyFlags& f) {
    const TrainConfig d;
    f.add(app, "--k-train", "k_train", std::to_string(d.k_train), "training stride");
    f.add_switch(app, "--mixed", "mixed_training", "draw one in-between position per pair (default off)");
    f.add(app, "--epochs", "epochs", std::to_string(d.epochs), "training epochs");
    f.add(app, "--batch", "batch_size", std::to_string(d.batch_size), "samples per Adam step");
    f.add(app, "--lr", "learning_rate", detail::fmt_double(d.learning_rate), "Adam learning rate");
    f.add(app, "--seed", "seed", std::to_string(d.seed), "initialization and sampling seed");
    f.add(app, "--checkpoint-every", "checkpoint_every", std::to_string(d.checkpoint_every),
          "write a checkpoint every n epochs (0: final only)");
    f.add(app, "--grad-clip", "grad_clip", detail::fmt_double(d.grad_clip), "max global gradient norm (0: off)",
          "FLOAT");
}

std::vector<std::size_t> parse_strides(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) {
        const long v = detail::parse_int("k-test", tok);
        if (v < 2) throw ArgumentError("k-test values must be >= 2, got " + tok);
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ArgumentError("--k-test needs at least one stride");
    return out;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json point_array(const std::vector<Point3>& pts) {
    auto a = nlohmann::json::array();
    for (const auto& p : pts) a.push_back({p[0], p[1], p[2]});
    return a;
}

// ---- make-synth ------------------------------------------------------------

struct SynthArgs {
    std::string kind, shape = "cube", out;
    std::size_t points = 0, frames = 0;
    std::uint64_t seed = 0;
    bool shuffle = false;
    double size = 1.0, amplitude = 0.1, angle = std::numbers::pi / 2;
    std::vector<double> velocity{1, 0, 0}, axis{0, 0, 1}, wave{1, 0, 0};
};

int cmd_make_synth(const SynthArgs& a) {
    SyntheticSpec spec;
    spec.kind = parse_motion(a.kind);
    spec.shape = parse_shape(a.shape);
    spec.n_points = a.points;
    spec.n_frames = a.frames;
    spec.seed = a.seed;
    spec.shuffle_frames = a.shuffle;
    spec.size = a.size;
    spec.amplitude = a.amplitude;
    spec.angle = a.angle;
    spec.velocity = {a.velocity[0], a.velocity[1], a.velocity[2]};
    spec.axis = {a.axis[0], a.axis[1], a.axis[2]};
    spec.wave = {a.wave[0], a.wave[1], a.wave[2]};
    auto [seq, truth] = gen_synthetic(spec);

    nlohmann::json j;
    j["format"] = "dpci-synthetic-truth";
    j["version"] = 1;
    j["kind"] = motion_name(spec.kind);
    j["shape"] = shape_name(spec.shape);
    j["points"] = spec.n_points;
    j["frames"] = spec.n_frames;
    j["seed"] = spec.seed;
    j["shuffled"] = spec.shuffle_frames;
    j["size"] = spec.size;
    j["velocity"] = a.velocity;
    j["axis"] = a.axis;
    j["angle"] = spec.angle;
    j["amplitude"] = spec.amplitude;
    j["wave"] = a.wave;
    std::vector<double> times;
    for (std::size_t f = 0; f < spec.n_frames; ++f) times.push_back(truth.frame_time(f));
    j["frame_times"] = times;
    j["base"] = point_array(truth.base);
    j["phase"] = truth.phase;
    j["direction"] = point_array(truth.direction);
    j["correspondences"] = truth.correspondences;

    const fs::path out(a.out);
    fs::create_directories(out);
    save_sequence(out / "seq.dpcs", seq);
    detail::write_file_atomic(out / "truth.json", j.dump(2) + "\n");
    std::printf("wrote %s (%zu frames x %zu points) and %s\n", (out / "seq.dpcs").c_str(), seq.num_frames(),
                seq.num_points(), (out / "truth.json").c_str());
    return kOk;
}

// ---- train / ablate ----------------------------------------------------------

void print_epoch(const EpochRecord& r, int total) {
    if (r.epoch == 1 || r.epoch == total || r.epoch % 10 == 0) {
        std::printf("epoch %d/%d  loss %.6g  %.0f ms\n", r.epoch, total, r.mean_loss, r.wall_ms);
        std::fflush(stdout);
    }
}

std::vector<Sequence> load_all(const std::vector<std::string>& paths) {
    std::vector<Sequence> out;
    for (const auto& p : paths) out.push_back(load_sequence(p));
    return out;
}

int cmd_train(const std::vector<std::string>& data, const std::string& out, const std::string& resume,
              const std::string& variant, const ModelConfig& mcfg_in, const TrainConfig& tcfg) {
    ModelConfig mcfg = mcfg_in;
    if (!variant.empty()) mcfg.variant = parse_variant(variant);
    auto dataset = load_all(data);
    TrainOptions opt;
    opt.out_dir = out;
    opt.resume_from = resume;
    opt.on_epoch = [&](const EpochRecord& r) { print_epoch(r, tcfg.epochs); };
    auto res = train<float>(dataset, mcfg, tcfg, opt);
    std::printf("wrote %s\n", (fs::path(out) / (tcfg.epochs > 0 ? "model.idea" : "init.idea")).c_str());
    std::printf("sample_hash %016llx\n", static_cast<unsigned long long>(res.sample_hash));
    return kOk;
}

int cmd_ablate(const std::vector<std::string>& data, const std::string& eval_seq, const std::string& out,
               const std::string& variant, std::size_t k_test, bool per_mille, const ModelConfig& mcfg,
               const TrainConfig& tcfg) {
    auto dataset = load_all(data);
    const Sequence test = eval_seq.empty() ? dataset.front() : load_sequence(eval_seq);
    AblationSpec spec;
    spec.variant = parse_variant(variant);
    spec.model = mcfg;
    spec.train = tcfg;
    spec.k_test = k_test;
    TrainOptions opt;
    opt.out_dir = out;
    opt.on_epoch = [&](const EpochRecord& r) { print_epoch(r, tcfg.epochs); };
    auto run = run_ablation<float>(spec, dataset, test, opt);

    const fs::path dir(out);
    const std::string name = variant_name(spec.variant);
    write_report(run.report, dir / ("report_" + name + ".csv"), {per_mille, true});
    // Diagnostics on the first test pair at its first in-between position.
    LtrSplit split = subsample_ltr(test, k_test);
    auto it = interpolate(run.model, split.ltr.frames[0], split.ltr.frames[1], 1.0 / static_cast<double>(k_test));
    auto s = export_alignment_diagnostics<double>(it.alignment, test.num_points(), dir / ("alignment_" + name));
    std::printf("variant %s  mean_emd %.9g  mean_cd %.9g  loss_terms %d  sample_hash %016llx  column_collision %.6g\n",
                name.c_str(), run.report.mean_emd, run.report.mean_cd, run.loss_terms,
                static_cast<unsigned long long>(run.sample_hash), s.column_collision_fraction);
    return kOk;
}

// ---- interp --------------------------------------------------------------------

struct InterpArgs {
    std::string ckpt, p0, p1, seq, out;
    std::size_t pair = 0, stride = 1;
    double t = -1;
    int steps = 0;
    bool dump = false;
};

int cmd_interp(const InterpArgs& a) {
    PointCloud p0, p1;
    if (!a.seq.empty()) {
        Sequence seq = load_sequence(a.seq);
        const std::size_t f0 = a.pair * a.stride, f1 = (a.pair + 1) * a.stride;
        if (f1 >= seq.num_frames()) {
            throw ArgumentError("--pair " + std::to_string(a.pair) + " with --stride " + std::to_string(a.stride) +
                                " needs frame " + std::to_string(f1) + ", sequence has " +
                                std::to_string(seq.num_frames()));
        }
        p0 = seq.frames[f0];
        p1 = seq.frames[f1];
    } else if (!a.p0.empty() && !a.p1.empty()) {
        p0 = read_xyz(a.p0);
        p1 = read_xyz(a.p1);
    } else {
        throw ArgumentError("give either --seq (with --pair) or both --p0 and --p1");
    }
    std::vector<double> times;
    if (a.steps > 0 && a.t >= 0) throw ArgumentError("--t and --steps are mutually exclusive");
    if (a.steps > 0) {
        if (a.steps < 2) throw ArgumentError("--steps must be >= 2");
        for (int i = 1; i < a.steps; ++i) times.push_back(static_cast<double>(i) / a.steps);
    } else if (a.t >= 0) {
        times.push_back(a.t);
    } else {
        throw ArgumentError("give --t or --steps");
    }

    IdeaNet<float> net = load_model<float>(a.ckpt);
    const fs::path out(a.out);
    fs::create_directories(out);
    std::string index = "frame,t\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        auto r = interpolate(net, p0, p1, times[i]);
        const std::string stem = detail::xyz_frame_name(i + 1);
        write_xyz(out / stem, r.picked, a.dump ? 17 : 9);
        index += stem + "," + fmt17(times[i]) + "\n";
        if (a.dump) {
            char dir[32];
            std::snprintf(dir, sizeof dir, "internals_%04zu", i + 1);
            const fs::path d = out / dir;
            fs::create_directories(d);
            write_xyz(d / "coarse_0.xyz", r.coarse_0, 17);
            write_xyz(d / "coarse_1.xyz", r.coarse_1, 17);
            write_xyz(d / "delta_0.xyz", r.delta_0, 17);
            write_xyz(d / "delta_1.xyz", r.delta_1, 17);
            write_xyz(d / "o_0.xyz", r.o_0, 17);
            write_xyz(d / "o_1.xyz", r.o_1, 17);
            export_alignment_diagnostics<double>(r.alignment, p0.size(), d / "alignment");
        }
    }
    detail::write_file_atomic(out / "frames.csv", index);
    std::printf("wrote %zu frame(s) to %s\n", times.size(), out.c_str());
    return kOk;
}

// ---- eval ------------------------------------------------------------------------

int cmd_eval(const std::string& ckpt, const std::string& seq_path, const std::string& strides, const std::string& out,
             bool per_mille, bool meta) {
    const auto ks = parse_strides(strides);
    IdeaNet<float> net = load_model<float>(ckpt);
    Sequence seq = load_sequence(seq_path);
    const fs::path dir(out);
    for (auto k : ks) {
        EvalReport r = evaluate(net, seq, k, fs::path(ckpt).filename().string());
        const fs::path path = dir / ("report_k" + std::to_string(k) + ".csv");
        write_report(r, path, {per_mille, meta});
        std::printf("k_test %zu  mean_emd %.9g  mean_cd %.9g  -> %s\n", k, r.mean_emd, r.mean_cd, path.c_str());
    }
    return kOk;
}

// ---- gradcheck -------------------------------------------------------------------

int cmd_gradcheck(const GradcheckOptions& opt, double tol, bool verbose) {
    GradcheckResult r = gradcheck(opt);
    if (verbose) {
        for (const auto& e : r.entries) {
            std::printf("%s[%zu] analytic %.10g numeric %.10g rel %.3g\n", e.param.c_str(), e.index, e.analytic,
                        e.numeric, e.rel_error);
        }
    }
    std::printf("max_rel_error %.6g over %zu sampled of %zu parameters (%.2f s)\n", r.max_rel_error, r.entries.size(),
                r.param_scalars, r.seconds);
    return r.max_rel_error < tol ? kOk : kCheck;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic point-cloud frame interpolation"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: DPCI_THREADS or all cores)")->default_val(0);

    SynthArgs sa;
    auto* synth = app.add_subcommand("make-synth", "generate a synthetic sequence with ground truth");
    synth->add_option("--kind", sa.kind, "translate | rotate | sine")->required();
    synth->add_option("--points", sa.points, "points per frame")->required();
    synth->add_option("--frames", sa.frames, "frame count")->required();
    synth->add_option("--out", sa.out, "output directory")->required();
    synth->add_option("--shape", sa.shape, "cube | sphere")->capture_default_str();
    synth->add_option("--seed", sa.seed, "sampling seed")->capture_default_str();
    synth->add_flag("--shuffle", sa.shuffle, "permute the rows of every frame (default off)");
    synth->add_option("--size", sa.size, "cube edge or sphere diameter")->capture_default_str();
    synth->add_option("--amplitude", sa.amplitude, "sine: radial amplitude")->capture_default_str();
    synth->add_option("--angle", sa.angle, "rotate: total angle in radians")->capture_default_str();
    synth->add_option("--velocity", sa.velocity, "translate: offset at the last frame")->expected(3)->capture_default_str();
    synth->add_option("--axis", sa.axis, "rotate: axis")->expected(3)->capture_default_str();
    synth->add_option("--wave", sa.wave, "sine: phase wave vector")->expected(3)->capture_default_str();

    std::vector<std::string> data;
    std::string out, config, resume, variant, eval_seq;
    KeyFlags train_flags, ablate_flags;
    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--data", data, "sequence (.dpcs or .xyz directory); repeatable")->required();
    train_cmd->add_option("--out", out, "output directory")->required();
    train_cmd->add_option("--config", config, "key = value file; explicit flags win");
    train_cmd->add_option("--resume", resume, "checkpoint to continue from");
    train_cmd->add_option("--variant", variant, "full | a..f")->default_str("full");
    add_model_flags(train_cmd, train_flags);
    add_train_flags(train_cmd, train_flags);

    std::string ablate_variant;
    std::size_t ablate_k = 3;
    bool per_mille = false, no_meta = false;
    auto* ablate = app.add_subcommand("ablate", "train and evaluate one ablation variant");
    ablate->add_option("--variant", ablate_variant, "full | a | b | c | d | e | f")->required();
    ablate->add_option("--data", data, "training sequence; repeatable")->required();
    ablate->add_option("--eval-seq", eval_seq, "evaluation sequence (default: first --data)");
    ablate->add_option("--k-test", ablate_k, "evaluation stride")->capture_default_str();
    ablate->add_option("--out", out, "output directory")->required();
    ablate->add_option("--config", config, "key = value file; explicit flags win");
    ablate->add_flag("--per-mille", per_mille, "report metrics in units of 1e-3");
    add_model_flags(ablate, ablate_flags);
    add_train_flags(ablate, ablate_flags);

    InterpArgs ia;
    auto* interp = app.add_subcommand("interp", "interpolate between two frames");
    interp->add_option("--ckpt", ia.ckpt, "checkpoint")->required();
    interp->add_option("--p0", ia.p0, "first frame (.xyz)");
    interp->add_option("--p1", ia.p1, "second frame (.xyz)");
    interp->add_option("--seq", ia.seq, "sequence to take the endpoints from");
    interp->add_option("--pair", ia.pair, "endpoint pair index within --seq")->capture_default_str();
    interp->add_option("--stride", ia.stride, "frames between the endpoints of a pair")->capture_default_str();
    interp->add_option("--t", ia.t, "single time in [0, 1]");
    interp->add_option("--steps", ia.steps, "n: frames at t = 1/n .. (n-1)/n");
    interp->add_option("--out", ia.out, "output directory")->required();
    interp->add_flag("--dump-internals", ia.dump, "also write coarse frames, increments, branch outputs and A");

    std::string ckpt, seq_path, strides = "3";
    auto* eval = app.add_subcommand("eval", "score a checkpoint on held-out frames");
    eval->add_option("--ckpt", ckpt, "checkpoint")->required();
    eval->add_option("--seq", seq_path, "ground-truth sequence")->required();
    eval->add_option("--k-test", strides, "stride or comma list of strides")->capture_default_str();
    eval->add_option("--out", out, "output directory")->required();
    eval->add_flag("--per-mille", per_mille, "report metrics in units of 1e-3");
    eval->add_flag("--no-meta", no_meta, "omit #meta lines");

    GradcheckOptions go;
    double tol = 1e-4;
    bool verbose = false;
    std::string gc_width = "0.125";
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full loss gradient");
    gc->add_option("--n", go.n_points, "points per frame")->capture_default_str();
    gc->add_option("--width-mult", gc_width, "channel width multiplier")->capture_default_str();
    gc->add_option("--samples", go.samples, "parameter scalars probed")->capture_default_str();
    gc->add_option("--seed", go.seed, "seed")->capture_default_str();
    gc->add_option("--tol", tol, "max relative error")->capture_default_str();
    gc->add_flag("--verbose", verbose, "print every probe");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (threads > 0) set_num_threads(static_cast<std::size_t>(threads));
        if (*synth) return cmd_make_synth(sa);
        if (*train_cmd || *ablate) {
            ModelConfig mcfg;
            TrainConfig tcfg;
            (*train_cmd ? train_flags : ablate_flags).apply(config, mcfg, tcfg);
            mcfg.validate();
            tcfg.validate();
            if (*train_cmd) return cmd_train(data, out, resume, variant == "full" ? "" : variant, mcfg, tcfg);
            return cmd_ablate(data, eval_seq, out, ablate_variant, ablate_k, per_mille, mcfg, tcfg);
        }
        if (*interp) return cmd_interp(ia);
        if (*eval) return cmd_eval(ckpt, seq_path, strides, out, per_mille, !no_meta);
        if (*gc) {
            go.width_mult = detail::parse_double("width-mult", gc_width);
            return cmd_gradcheck(go, tol, verbose);
        }
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UnsupportedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
