// Acceptance runner. Prints one PASS/FAIL line per criterion and exits nonzero if
// any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dpci/dpci.hpp"

using namespace dpci;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

PointCloud random_cloud(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    PointCloud p;
    p.points.resize(n);
    for (auto& q : p.points)
        for (auto& c : q) c = u(rng);
    return p;
}

double brute_force_emd(const PointCloud& x, const PointCloud& y) {
    std::vector<std::uint32_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0u);
    double best = std::numeric_limits<double>::infinity();
    do best = std::min(best, assignment_cost(x, y, perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Shared desk-scale model setup for the training criteria.
ModelConfig desk_model() {
    ModelConfig m;
    m.width_mult = 0.125;
    m.norm_instance_stats = true;
    m.zero_init_delta = true;
    return m;
}

TrainConfig desk_train(int epochs) {
    TrainConfig t;
    t.k_train = 3;
    t.batch_size = 1;
    t.learning_rate = 2e-4;
    t.epochs = epochs;
    t.seed = 0;
    return t;
}

SyntheticSpec sine_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.kind = MotionKind::sine;
    s.n_points = 64;
    s.n_frames = 23;
    s.amplitude = 0.25;
    s.seed = seed;
    return s;
}

// Criteria 7 to 9 share the trained sine models.
struct SineRuns {
    Sequence train_seq, test_seq;
    std::map<Variant, AblationRun<float>> runs;
};

SineRuns& sine_runs() {
    static SineRuns* s = [] {
        auto* r = new SineRuns;
        r->train_seq = gen_synthetic(sine_spec(0)).first;
        r->test_seq = gen_synthetic(sine_spec(101)).first;
        for (Variant v : {Variant::full, Variant::e_no_compensation, Variant::f_single_branch}) {
            AblationSpec spec;
            spec.variant = v;
            spec.model = desk_model();
            spec.train = desk_train(100);
            const auto t0 = Clock::now();
            r->runs.emplace(v, run_ablation<float>(spec, {r->train_seq}, r->train_seq));
            std::printf("  trained %s in %.1f s\n", variant_name(v), seconds_since(t0));
            std::fflush(stdout);
        }
        return r;
    }();
    return *s;
}

// ---- criteria ----

Outcome c1_gradcheck() {
    GradcheckOptions opt;
    auto r = gradcheck(opt);
    const bool ok = r.max_rel_error < 1e-4 && r.entries.size() >= 100 && r.seconds < 60;
    return {ok, fmt("max_rel_error=%.3g (<1e-4) samples=%zu (>=100) n=%zu seconds=%.1f (<60)", r.max_rel_error,
                    r.entries.size(), opt.n_points, r.seconds)};
}

Outcome c2_emd_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> size(1, 8);
    double worst = 0;
    const auto t0 = Clock::now();
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = size(rng);
        auto x = random_cloud(n, rng), y = random_cloud(n, rng);
        worst = std::max(worst, std::abs(emd_exact(x, y).cost - brute_force_emd(x, y)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 10, fmt("max|hungarian-brute|=%.3g (<=1e-12) seconds=%.2f (<10)", worst, secs)};
}

Outcome c3_auction() {
    std::mt19937_64 rng(3);
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
        auto x = random_cloud(128, rng), y = random_cloud(128, rng);
        worst = std::max(worst, emd_approx(x, y).cost / emd_exact(x, y).cost);
    }
    return {worst <= 1.01, fmt("max auction/hungarian=%.6f (<=1.01)", worst)};
}

Outcome c4_alignment() {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    std::uniform_int_distribution<std::size_t> size(2, 64);
    ModelConfig cfg;
    double worst_sum = 0, min_entry = 1;
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = size(rng), d = 8 + i % 5 * 16;
        std::vector<double> a(n * d), b(n * d);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        auto al = alignment(Tensor<double>({n, d}, a), Tensor<double>({n, d}, b), cfg);
        const auto& vals = al.a.values();
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < n; ++c) {
                s += vals[r * n + c];
                min_entry = std::min(min_entry, vals[r * n + c]);
            }
            worst_sum = std::max(worst_sum, std::abs(s - 1));
        }
    }
    std::mt19937_64 crng(40);
    auto p = random_cloud(64, crng);
    IdeaNet<float> net(desk_model(), 0);
    auto out = interpolate(net, p, p, 0.5);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < 64; ++r) {
        auto row = out.alignment.begin() + static_cast<std::ptrdiff_t>(r * 64);
        hits += static_cast<std::size_t>(std::max_element(row, row + 64) - row) == r;
    }
    const bool ok = worst_sum <= 1e-6 && min_entry >= 0 && hits == 64;
    return {ok, fmt("max|rowsum-1|=%.3g (<=1e-6) min_entry=%.3g (>=0) self_match=%zu/64", worst_sum, min_entry, hits)};
}

Outcome c5_coarse_exact() {
    SyntheticSpec s;
    s.kind = MotionKind::translate;
    s.n_points = 64;
    s.n_frames = 9;
    s.shuffle_frames = true;
    s.seed = 5;
    auto [seq, truth] = gen_synthetic(s);
    double worst = 0;
    std::size_t checked = 0;
    for (std::size_t k : {2, 3, 4, 8}) {
        for (std::size_t f0 = 0; f0 + k < seq.num_frames(); f0 += k) {
            const std::size_t f1 = f0 + k;
            // Row i of frame f0 maps to the row of frame f1 holding the same trajectory.
            std::vector<std::uint32_t> where(s.n_points), perm(s.n_points);
            for (std::size_t r = 0; r < s.n_points; ++r) where[truth.correspondences[f1][r]] = static_cast<std::uint32_t>(r);
            for (std::size_t r = 0; r < s.n_points; ++r) perm[r] = where[truth.correspondences[f0][r]];
            const auto a = permutation_matrix<double>(perm);
            const auto p0 = to_tensor<double>(seq.frames[f0]), p1 = to_tensor<double>(seq.frames[f1]);
            for (std::size_t j = 1; j < k; ++j) {
                auto [c0, c1] = coarse_interpolate(p0, p1, a, static_cast<double>(j) / static_cast<double>(k));
                for (const auto& c : {c0, c1}) {
                    worst = std::max(worst, emd_exact(to_cloud(c), seq.frames[f0 + j]).cost);
                    ++checked;
                }
            }
        }
    }
    return {worst <= 1e-9, fmt("max EMD=%.3g (<=1e-9) over %zu branch outputs", worst, checked)};
}

Outcome c6_overfit() {
    SyntheticSpec s;
    s.kind = MotionKind::translate;
    s.n_points = 64;
    s.n_frames = 9;
    s.shape = ShapeKind::cube;
    auto seq = gen_synthetic(s).first;
    const double step = std::sqrt(s.velocity[0] * s.velocity[0] + s.velocity[1] * s.velocity[1] +
                                  s.velocity[2] * s.velocity[2]) /
                        static_cast<double>(s.n_frames - 1);
    const double limit = 0.05 * step;
    IdeaNet<float> init(desk_model(), 0);
    const double before = evaluate(init, seq, 3).mean_emd;
    const auto t0 = Clock::now();
    auto tr = train<float>({seq}, desk_model(), desk_train(300));
    const double secs = seconds_since(t0);
    const double after = evaluate(tr.model, seq, 3).mean_emd;
    return {after < limit && secs < 900,
            fmt("held-out EMD=%.5f (<%.5f, 5%% of step %.4f) untrained=%.5f epochs=300 seconds=%.0f (<900)", after,
                limit, step, before, secs)};
}

Outcome c7_compensation() {
    auto& s = sine_runs();
    auto& full = s.runs.at(Variant::full);
    auto& e = s.runs.at(Variant::e_no_compensation);
    const double f_test = evaluate(full.model, s.test_seq, 3).mean_emd;
    const double e_test = evaluate(e.model, s.test_seq, 3).mean_emd;
    return {f_test < e_test, fmt("unseen seq: full=%.5f < e=%.5f; training seq: full=%.5f e=%.5f", f_test, e_test,
                                 full.report.mean_emd, e.report.mean_emd)};
}

Outcome c8_dual_branch() {
    auto& s = sine_runs();
    auto& full = s.runs.at(Variant::full);
    auto& f = s.runs.at(Variant::f_single_branch);
    const double full_test = evaluate(full.model, s.test_seq, 3).mean_emd;
    const double f_test = evaluate(f.model, s.test_seq, 3).mean_emd;
    // Collision measured on the first test pair, at the first in-between position.
    auto collision = [&](IdeaNet<float>& net) {
        auto out = interpolate(net, s.test_seq.frames[0], s.test_seq.frames[3], 1.0 / 3);
        return summarize_alignment<double>(out.alignment, s.test_seq.num_points());
    };
    const auto cf = collision(full.model), cs = collision(f.model);
    const bool ok = full_test <= f_test && cs.column_collision_fraction > cf.column_collision_fraction;
    return {ok, fmt("unseen seq: full=%.5f <= f=%.5f; column collision f=%.4f > full=%.4f (rows: f=%.4f full=%.4f); "
                    "training seq: full=%.5f f=%.5f",
                    full_test, f_test, cs.column_collision_fraction, cf.column_collision_fraction,
                    cs.colliding_row_fraction, cf.colliding_row_fraction, full.report.mean_emd, f.report.mean_emd)};
}

Outcome c9_flexibility() {
    auto& s = sine_runs();
    auto& net = s.runs.at(Variant::full).model;
    std::vector<double> m;
    std::string text;
    for (std::size_t k : {3, 5, 7, 9, 11}) {
        m.push_back(evaluate(net, s.test_seq, k).mean_emd);
        text += fmt("k%zu=%.5f ", k, m.back());
    }
    const bool ok = std::is_sorted(m.begin(), m.end());
    return {ok, "unseen seq: " + text + "(non-decreasing)"};
}

Outcome c10_mixed_sampling() {
    SyntheticSpec s;
    s.n_points = 8;
    s.n_frames = 5;
    auto seq = gen_synthetic(s).first;
    TrainConfig cfg;
    cfg.k_train = 4;
    cfg.mixed_training = true;
    std::mt19937_64 rng(10);
    std::array<std::size_t, 3> count{};
    for (int i = 0; i < 10000; ++i) ++count[make_samples(seq, 0, cfg, rng).at(0).j - 1];
    double worst = 0, chi2 = 0;
    for (auto c : count) {
        worst = std::max(worst, std::abs(c / 10000.0 - 1.0 / 3));
        chi2 += std::pow(c - 10000.0 / 3, 2) / (10000.0 / 3);
    }
    return {worst <= 0.05, fmt("freq j1=%.4f j2=%.4f j3=%.4f max|f-1/3|=%.4f (<=0.05) chi2=%.2f", count[0] / 1e4,
                               count[1] / 1e4, count[2] / 1e4, worst, chi2)};
}

Outcome c11_determinism() {
    SyntheticSpec s = sine_spec(0);
    s.n_frames = 13;
    auto seq = gen_synthetic(s).first;
    TrainConfig t = desk_train(3);
    auto a = train<float>({seq}, desk_model(), t);
    auto b = train<float>({seq}, desk_model(), t);
    const std::size_t n = std::min<std::size_t>(10, a.iteration_losses.size());
    bool same_losses = n == 10 && b.iteration_losses.size() >= 10 &&
                       std::equal(a.iteration_losses.begin(), a.iteration_losses.begin() + 10, b.iteration_losses.begin());

    const fs::path dir = fs::temp_directory_path() / "dpci_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SyntheticSpec r = sine_spec(11);
    r.shuffle_frames = true;
    auto orig = gen_synthetic(r).first;
    save_sequence(dir / "seq.dpcs", orig);
    auto back = load_sequence(dir / "seq.dpcs");
    // Coordinates are stored as float32: decoding gives the rounded originals and
    // re-encoding reproduces the file byte for byte.
    save_sequence(dir / "again.dpcs", back);
    bool dpcs_exact = back.num_frames() == orig.num_frames() &&
                      detail::read_file_bytes(dir / "again.dpcs") == detail::read_file_bytes(dir / "seq.dpcs");
    for (std::size_t f = 0; dpcs_exact && f < orig.num_frames(); ++f)
        for (std::size_t i = 0; dpcs_exact && i < orig.num_points(); ++i)
            for (int c = 0; c < 3; ++c)
                dpcs_exact = dpcs_exact && back.frames[f][i][c] == static_cast<double>(static_cast<float>(orig.frames[f][i][c]));

    auto rep = evaluate(a.model, seq, 3, "determinism");
    bool report_ok = true;
    for (bool per_mille : {false, true}) {
        write_report(rep, dir / "report.csv", {per_mille, true});
        auto rr = read_report(dir / "report.csv");
        auto near = [](double x, double y) { return std::abs(x - y) <= 5e-9 * std::max(std::abs(x), std::abs(y)); };
        report_ok = report_ok && rr.rows.size() == rep.rows.size() && rr.k_test == rep.k_test &&
                    rr.checkpoint_id == rep.checkpoint_id && near(rr.mean_emd, rep.mean_emd) &&
                    near(rr.mean_cd, rep.mean_cd);
        for (std::size_t i = 0; report_ok && i < rep.rows.size(); ++i)
            report_ok = rr.rows[i].pair == rep.rows[i].pair && rr.rows[i].j == rep.rows[i].j &&
                        near(rr.rows[i].t, rep.rows[i].t) && near(rr.rows[i].emd, rep.rows[i].emd) &&
                        near(rr.rows[i].cd, rep.rows[i].cd);
    }
    fs::remove_all(dir);
    return {same_losses && dpcs_exact && report_ok,
            fmt("first 10 losses bit-identical=%s dpcs bit-exact=%s report reparse (9 significant digits)=%s",
                same_losses ? "yes" : "no", dpcs_exact ? "yes" : "no", report_ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient correctness", c1_gradcheck},
        {"EMD oracle", c2_emd_oracle},
        {"EMD approximation", c3_auction},
        {"alignment invariants", c4_alignment},
        {"coarse-path exactness", c5_coarse_exact},
        {"overfit run", c6_overfit},
        {"nonlinear benefit", c7_compensation},
        {"dual-branch benefit", c8_dual_branch},
        {"flexibility trend", c9_flexibility},
        {"mixed-training sampling", c10_mixed_sampling},
        {"determinism and formats", c11_determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d failed\n", failed);
    return failed ? 1 : 0;
}
