// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 1 if any failed.
// Pass criterion numbers as arguments to run a subset, e.g. `acceptance 5 7 8`.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "t2p/baseline.hpp"
#include "t2p/binconcrete.hpp"
#include "t2p/data.hpp"
#include "t2p/eval.hpp"
#include "t2p/model.hpp"
#include "t2p/pipeline.hpp"
#include "t2p/presets.hpp"

using namespace t2p;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median_of(std::vector<double> v) { return median(v); }

std::string join(const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : " ") + fmt(x, 3);
    return out;
}

// One trained run on a labeled synthetic series, scored the same way `t2p evaluate` does.
struct SeedRun {
    Scores scores;
    TrainTrace trace;
};

struct SeedRuns {
    std::vector<SeedRun> runs;
    double seconds = 0.0;

    std::vector<double> column(const std::function<double(const SeedRun&)>& get) const {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(get(r));
        return v;
    }
    std::vector<double> compression() const { return column([](const SeedRun& r) { return r.scores.compression; }); }
    std::vector<double> precision() const { return column([](const SeedRun& r) { return *r.scores.precision; }); }
    std::vector<double> recall() const { return column([](const SeedRun& r) { return *r.scores.recall; }); }
};

SeedRuns run_seeds(const std::string& preset, const std::function<TimeSeries(std::uint64_t)>& make_series) {
    SeedRuns out;
    const auto t0 = Clock::now();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TimeSeries ts = make_series(seed);
        T2PConfig cfg;
        apply_preset(cfg, find_preset(preset));
        cfg.seed = seed;
        const auto seg = segment(ts, cfg.pattern_length);
        TrainResult trained = train(seg.windows, cfg);
        out.runs.push_back({score_summary(ts, summarize(trained.model, ts)), std::move(trained.trace)});
        std::cerr << "  " << preset << " seed " << seed << ": compression " << fmt(out.runs.back().scores.compression)
                  << " precision " << fmt(*out.runs.back().scores.precision) << " recall "
                  << fmt(*out.runs.back().scores.recall) << "\n";
    }
    out.seconds = seconds_since(t0);
    return out;
}

Outcome reproduction(const SeedRuns& r, double min_compression, double min_precision, double budget_seconds) {
    const double c = median_of(r.compression()), p = median_of(r.precision()), rc = median_of(r.recall());
    Outcome o;
    o.pass = c >= min_compression && p >= min_precision && rc == 1.0 && r.seconds <= budget_seconds;
    o.detail = "median compression " + fmt(c) + " [" + join(r.compression()) + "], median precision " + fmt(p) +
               " [" + join(r.precision()) + "], median recall " + fmt(rc) + " [" + join(r.recall()) + "], " +
               fmt(r.seconds, 3) + " s";
    return o;
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Shell {
    int code = -1;
    std::string out;
};

Shell t2p_cli(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt";
    const std::string cmd = std::string(T2P_BIN) + " " + args + " > " + out.string() + " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------------------------

Outcome gradient_check() {
    const auto t0 = Clock::now();
    // Full objective on 20 SY4 windows, frozen noise.
    T2PConfig cfg;
    apply_preset(cfg, find_preset("sy4"));
    const T2PModel model(cfg);
    const auto seg = segment(gen_sy4(0.0, 5, 0), 100);
    std::mt19937_64 pick(1);
    std::vector<std::vector<double>> batch;
    std::uniform_int_distribution<std::size_t> idx(0, seg.windows.size() - 1);
    for (int i = 0; i < 20; ++i) batch.push_back(seg.windows[idx(pick)]);
    T2PModel probe = model;
    auto f = [&] {
        std::mt19937_64 rng(99);
        return loss(probe, batch, cfg, rng).total;
    };
    const double full = finite_diff_check(f, probe.parameters(), {1e-5, 8, 2});

    // Per-op checks on small random inputs.
    std::mt19937_64 rng(21);
    auto any = [&](std::size_t n) { return random_values(n, rng, -2.0, 2.0); };
    auto pos = [&](std::size_t n) { return random_values(n, rng, 0.5, 2.0); };
    auto p = [](std::vector<double> v) { return DiffArray::parameter(v, {v.size()}); };
    const auto w = DiffArray::constant(any(4));
    auto weighted = [w](const DiffArray& a) { return sum(mul(a, w)); };
    struct Case {
        std::vector<DiffArray> params;
        std::function<DiffArray(std::vector<DiffArray>&)> f;
    };
    std::vector<Case> cases{
        {{p(any(4)), p(pos(4))}, [=](auto& ps) { return weighted(div(add(ps[0], ps[1]), ps[1])); }},
        {{p(any(4)), p(any(4))}, [=](auto& ps) { return weighted(logaddexp(mul(ps[0], ps[1]), ps[1])); }},
        {{p(pos(4))}, [=](auto& ps) { return weighted(exp(log(square(ps[0])))); }},
        {{p(any(4))}, [=](auto& ps) { return weighted(softplus(sigmoid(ps[0]))); }},
        {{p(any(4))}, [=](auto& ps) { return weighted(softmax(ps[0])); }},
        {{p(pos(4))}, [=](auto& ps) { return weighted(relu(add_scalar(clamp_min(ps[0], 0.1), -1.25))); }},
        {{DiffArray::parameter(any(12), {4, 3}), p(any(3)), p(any(4))},
         [=](auto& ps) { return weighted(linear(ps[0], ps[1], ps[2])); }},
        {{p(any(3)), DiffArray::parameter(any(12), {3, 4})}, [=](auto& ps) { return weighted(vecmat(ps[0], ps[1])); }},
        {{p(any(8))}, [=](auto& ps) { return weighted(maxpool1d(ps[0], 2, 2)); }},
        {{DiffArray::parameter(any(6), {1, 6}), DiffArray::parameter(any(3), {1, 1, 3}), p(any(1))},
         [=](auto& ps) { return weighted(reshape(conv1d(ps[0], ps[1], 1, 0, ps[2]), {4})); }},
        {{p(any(4)), p(any(4))}, [=](auto& ps) { return mse(ps[0], ps[1]); }},
        {{p(any(2))}, [=](auto& ps) { return weighted(reshape(tile(ps[0], 2), {4})); }},
    };
    double per_op = 0.0;
    for (auto& c : cases) per_op = std::max(per_op, finite_diff_check([&] { return c.f(c.params); }, c.params));
    const double secs = seconds_since(t0);
    return {full < 1e-3 && per_op < 1e-4 && secs <= 60.0,
            "full objective " + fmt(full, 3) + ", worst per-op " + fmt(per_op, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome density_normalization() {
    const auto t0 = Clock::now();
    // x = logistic(t); each half integrated on t in [-200, 0], the upper one by reflection.
    auto logistic = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
    auto half = [&](const BinConcreteParams& q) {
        auto g = [&](double t) {
            const double x = logistic(t);
            return pdf(x, q) * x * logistic(-t);
        };
        // Composite Simpson on a fine grid; the integrand is smooth in t.
        const int n = 40000;
        const double a = -200.0, h = 200.0 / n;
        double s = g(a) + g(0.0);
        for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
        return s * h / 3.0;
    };
    double worst = 0.0;
    for (double alpha : {0.1, 0.8, 1.0, 5.0})
        for (double lambda : {0.1, 0.21, 0.5, 0.83, 1.0})
            worst = std::max(worst, std::abs(half({alpha, lambda}) + half({1.0 / alpha, lambda}) - 1.0));
    bool midpoint = true;
    for (double lambda : {0.1, 0.21, 0.5, 0.83, 1.0}) midpoint = midpoint && pdf(0.5, {1.0, lambda}) == lambda;
    const double secs = seconds_since(t0);
    return {worst <= 1e-3 && midpoint && secs <= 1.0,
            "worst |mass - 1| " + fmt(worst, 3) + ", pdf(0.5; 1, lambda) == lambda: " + (midpoint ? "yes" : "no") +
                ", " + fmt(secs, 3) + " s"};
}

Outcome kl_sanity() {
    const BinConcreteParams p(0.8, 0.21), q(2.0, 0.83);
    // Identical distributions: estimate and its per-draw standard error from S = 1e4 draws.
    std::mt19937_64 rng(5);
    const std::size_t S = 10000;
    std::vector<double> terms;
    for (std::size_t i = 0; i < S; ++i) terms.push_back(mc_kl(p, p, KlOptions{1}, rng));
    const auto ms = mean_std(terms);
    const double se = ms.stddev / std::sqrt(static_cast<double>(S));
    const bool zero = std::abs(ms.mean) <= 3.0 * se;

    auto variance = [&](std::size_t s, std::uint64_t seed) {
        std::mt19937_64 r(seed);
        std::vector<double> v;
        for (int i = 0; i < 200; ++i) v.push_back(mc_kl(q, p, KlOptions{s}, r));
        const double sd = mean_std(v).stddev;
        return sd * sd;
    };
    const double ratio = variance(40, 12) / variance(10, 11);
    const bool shrink = std::abs(ratio - 0.25) <= 0.25 * 0.3;
    return {zero && shrink, "KL(p||p) = " + fmt(ms.mean, 3) + " (3 SE = " + fmt(3.0 * se, 3) +
                                "), Var[4S]/Var[S] = " + fmt(ratio, 3) + " (S = 10, 200 repetitions)"};
}

Outcome sparsity_dynamics(const SeedRuns& r) {
    const auto first = r.column([](const SeedRun& s) { return s.trace.epochs.front().sparsity; });
    const auto last = r.column([](const SeedRun& s) { return s.trace.epochs.back().sparsity; });
    const double f = median_of(first), l = median_of(last);
    return {l >= 0.4 && l > f,
            "median final sparsity " + fmt(l) + " [" + join(last) + "], median epoch-1 " + fmt(f) + " [" + join(first) + "]"};
}

Outcome baseline_contrast(const SeedRuns& t2p_runs) {
    const TimeSeries ts = gen_sy4(0.0, 10, 0);
    const auto res = greedy_snippets(ts, 100, 4);
    const Scores sc = score_summary(ts, snippet_summary(ts, res));
    const double ours = median_of(t2p_runs.compression());
    return {sc.compression < ours, "snippets compression " + fmt(sc.compression) + " (precision " +
                                       fmt(*sc.precision) + ", recall " + fmt(*sc.recall) + ") vs T2P median " +
                                       fmt(ours)};
}

Outcome worked_example() {
    const auto dir = fresh_dir("t2p_accept_mdl");
    const std::string fx = T2P_FIXTURES;
    const Shell r = t2p_cli("evaluate --data " + fx + "/mdl_example.csv --assignments " + fx +
                                "/mdl_example.assignments.csv -m 100 --report " + (dir / "r.json").string(),
                            dir);
    // Second row field is the compression, printed round-trip exact.
    double got = std::nan("");
    std::istringstream lines(r.out);
    std::string line;
    while (std::getline(lines, line))
        if (line.rfind("mdl_example,0,", 0) == 0) got = std::stod(line.substr(14, line.find(',', 14) - 14));
    fs::remove_all(dir);
    return {r.code == 0 && got == 1000.0 / 210.0, "compression " + fmt(got, 17) + ", expected " + fmt(1000.0 / 210.0, 17)};
}

Outcome sweep_argmax() {
    const auto t0 = Clock::now();
    const auto dir = fresh_dir("t2p_accept_sweep");
    T2PConfig base;
    apply_preset(base, find_preset("sy4"));
    const auto r = run_sweep(gen_sy4(0.0, 10, 0), {2, 4, 6}, {50, 100, 200}, {0}, base, dir, worker_count());
    fs::remove_all(dir);
    std::string grid;
    for (const auto& c : r.cells)
        grid += "(" + std::to_string(c.k) + "," + std::to_string(c.m) + ")=" + (c.compression ? fmt(*c.compression, 3) : "-") + " ";
    const SweepCell* best = r.best();
    const SweepCell& target = r.cells[1 * 3 + 1];
    const bool pass = best && target.compression && *target.compression >= *best->compression;
    return {pass, grid + "; " + fmt(seconds_since(t0), 3) + " s"};
}

Outcome scalability() {
    T2PConfig cfg;
    apply_preset(cfg, find_preset("sy4"));
    cfg.epochs = 20;
    const std::vector<std::size_t> sizes{4000, 16000};
    const auto rows = bench_runtime([](std::size_t n) { return segment(gen_sy4(0.0, n / 400, 0), 100).windows; },
                                    sizes, [&](const auto& windows) { train(windows, cfg); }, 3);
    const double ratio = rows[1].median_seconds / rows[0].median_seconds;
    return {ratio <= 5.0, "t(4000) = " + fmt(rows[0].median_seconds, 3) + " s, t(16000) = " +
                              fmt(rows[1].median_seconds, 3) + " s, ratio " + fmt(ratio, 3) + " (20 epochs)"};
}

Outcome determinism() {
    const auto dir = fresh_dir("t2p_accept_determinism");
    auto at = [&](const std::string& n) { return (dir / n).string(); };
    const std::vector<std::string> commands{
        "generate --preset sy4 --noise 30 --repeats 2 --seed 3 -o " + at("d.csv"),
        "generate --preset ar1 --length 500 --alpha 0.9 --seed 3 -o " + at("ar.csv"),
        "train --data " + at("d.csv") + " --model " + at("m.ckpt") + " --epochs 5 --seed 1",
        "summarize --model " + at("m.ckpt") + " --data " + at("d.csv") + " -o " + at("s"),
        "evaluate --data " + at("d.csv") + " --model " + at("m.ckpt") + " -o " + at("e.csv") + " --report " + at("e.json"),
        "baseline --data " + at("d.csv") + " --method dendrogram-ed -m 100 -o " + at("ed"),
        "baseline --data " + at("d.csv") + " --method dendrogram-dtw -m 100 -o " + at("dtw"),
        "baseline --data " + at("d.csv") + " --method snippets -m 100 -k 4 -o " + at("b"),
        "sweep --data " + at("d.csv") + " --ks 2 4 --ms 50 100 --epochs 2 -o " + at("sw"),
        "bench --sizes 400 800 --repeats 1 --epochs 1 -o " + at("bench.csv"),
    };
    std::map<std::string, std::string> first;
    std::set<std::string> nonzero;
    auto snapshot = [&] {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            const std::string name = fs::relative(e.path(), dir).string();
            if (name == "stdout.txt" || name == "stderr.txt") continue;
            std::string text = slurp(e.path());
            // Timings are the only non-reproducible field: keep the size column of the bench table.
            if (name == "bench.csv") {
                std::istringstream in(text);
                std::string row, kept;
                while (std::getline(in, row)) kept += row.substr(0, row.find(',')) + "\n";
                text = kept;
            }
            files[name] = text;
        }
        return files;
    };
    auto run_all = [&] {
        for (const auto& c : commands)
            if (t2p_cli(c, dir).code != 0) nonzero.insert(c.substr(0, c.find(' ')));
    };
    run_all();
    first = snapshot();
    for (const auto& [name, text] : first)
        if (name.rfind("sw/", 0) == 0) fs::remove(dir / name);
    run_all();
    const auto second = snapshot();
    std::string differing;
    for (const auto& [name, text] : first)
        if (!second.count(name) || second.at(name) != text) differing += " " + name;
    fs::remove_all(dir);
    const bool pass = nonzero.empty() && differing.empty() && first.size() >= 15;
    std::string detail = std::to_string(first.size()) + " output files compared";
    if (!differing.empty()) detail += "; differing:" + differing;
    for (const auto& c : nonzero) detail += "; '" + c + "' failed";
    return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

    int failures = 0;
    auto report = [&](int n, const std::string& name, const Outcome& o) {
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << n << ". " << name << ": " << o.detail << std::endl;
        if (!o.pass) ++failures;
    };
    auto guarded = [&](int n, const std::string& name, const std::function<Outcome()>& f) {
        if (!wanted(n)) return;
        try {
            report(n, name, f());
        } catch (const std::exception& e) {
            report(n, name, {false, std::string("threw: ") + e.what()});
        }
    };

    std::optional<SeedRuns> sy4_clean;
    auto clean_runs = [&]() -> const SeedRuns& {
        if (!sy4_clean) sy4_clean = run_seeds("sy4", [](std::uint64_t s) { return gen_sy4(0.0, 10, s); });
        return *sy4_clean;
    };

    guarded(1, "SY4-0% reproduction", [&] { return reproduction(clean_runs(), 6.0, 0.95, 600.0); });
    guarded(2, "SY4-100% robustness", [&] {
        return reproduction(run_seeds("sy4", [](std::uint64_t s) { return gen_sy4(100.0, 10, s); }), 3.5, 0.85, 600.0);
    });
    guarded(3, "SY10 reproduction", [&] {
        return reproduction(run_seeds("sy10", [](std::uint64_t s) { return gen_sy10(10, s); }), 6.5, 0.95, 900.0);
    });
    guarded(4, "Baseline contrast", [&] { return baseline_contrast(clean_runs()); });
    guarded(5, "MDL worked example", worked_example);
    guarded(6, "Gradient correctness", gradient_check);
    guarded(7, "BinConcrete density normalization", density_normalization);
    guarded(8, "KL estimator sanity", kl_sanity);
    guarded(9, "Sparsity dynamics", [&] { return sparsity_dynamics(clean_runs()); });
    guarded(10, "Sweep argmax", sweep_argmax);
    guarded(11, "Scalability", scalability);
    guarded(12, "Determinism", determinism);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
