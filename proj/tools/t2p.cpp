// t2p: generate, train, summarize, evaluate, sweep, baseline, bench.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "t2p/baseline.hpp"
#include "t2p/checkpoint.hpp"
#include "t2p/config.hpp"
#include "t2p/data.hpp"
#include "t2p/errors.hpp"
#include "t2p/eval.hpp"
#include "t2p/model.hpp"
#include "t2p/pipeline.hpp"
#include "t2p/presets.hpp"
#include "t2p/svg.hpp"

namespace fs = std::filesystem;
using namespace t2p;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << content;
    if (!out) throw InputError("write failed for '" + path + "'");
}

/// Provenance sidecar next to an output file.
void write_sidecar(const std::string& output, const KeyValues& kv) { write_text(output + ".meta", to_text(kv)); }

KeyValues with_prefix(const KeyValues& kv, const std::string& prefix) {
    KeyValues out;
    for (const auto& [k, v] : kv) out[prefix + k] = v;
    return out;
}

TimeSeries read_series(const std::string& path) {
    if (!fs::exists(path)) throw InputError("data file '" + path + "' does not exist");
    TimeSeries ts = load_csv(path);
    ts.validate();
    return ts;
}

// Model hyperparameters: flags > config file > preset > defaults.
struct ConfigFlags {
    std::string preset;
    std::string config_file;
    std::optional<std::size_t> n_patterns, pattern_length, epochs, batch_size, mc_samples;
    std::optional<double> prior_location, lambda1, lambda2, learning_rate;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> kl_mode;

    void add_to(CLI::App* app) {
        app->add_option("--preset", preset, "Hyperparameter preset (" + preset_names() + ")");
        app->add_option("--config", config_file, "Key-value config file");
        app->add_option("-k,--n-patterns", n_patterns, "Number of patterns k");
        app->add_option("-m,--pattern-length", pattern_length, "Pattern / window length m");
        app->add_option("--prior-location", prior_location, "BinConcrete prior location a");
        app->add_option("--lambda1", lambda1, "Posterior temperature");
        app->add_option("--lambda2", lambda2, "Prior temperature");
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--lr,--learning-rate", learning_rate, "Adam learning rate");
        app->add_option("--batch-size", batch_size, "Mini-batch size");
        app->add_option("--mc-samples", mc_samples, "Monte-Carlo samples for the KL term");
        app->add_option("--kl-mode", kl_mode, "posterior or uniform");
        app->add_option("--seed", seed, "Random seed");
    }

    T2PConfig resolve() const {
        T2PConfig c;
        if (!preset.empty()) apply_preset(c, find_preset(preset));
        if (!config_file.empty()) c.apply(load_key_values(config_file));
        KeyValues kv;
        if (n_patterns) kv["n_patterns"] = std::to_string(*n_patterns);
        if (pattern_length) kv["pattern_length"] = std::to_string(*pattern_length);
        if (prior_location) kv["prior_location"] = format_double(*prior_location);
        if (lambda1) kv["lambda1"] = format_double(*lambda1);
        if (lambda2) kv["lambda2"] = format_double(*lambda2);
        if (epochs) kv["epochs"] = std::to_string(*epochs);
        if (learning_rate) kv["learning_rate"] = format_double(*learning_rate);
        if (batch_size) kv["batch_size"] = std::to_string(*batch_size);
        if (mc_samples) kv["mc_samples"] = std::to_string(*mc_samples);
        if (seed) kv["seed"] = std::to_string(*seed);
        if (kl_mode) kv["kl_mode"] = *kl_mode;
        c.apply(kv);
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
    std::string preset = "sy4";
    std::string spec_file;
    double noise = 0.0;
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    std::size_t length = 1000;
    double alpha = 0.9;
    double noise_std = 1.0;
    std::string out;
};

std::vector<PatternDef> parse_pattern_list(const std::string& text) {
    std::vector<PatternDef> out;
    for (const auto& item : split(text, ';')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ConfigError("pattern '" + item + "' must be amplitude:frequency");
        out.push_back({parse_double(parts[0], "amplitude"), parse_double(parts[1], "frequency")});
    }
    return out;
}

/// Spec file keys: name, patterns ("amp:freq;amp:freq"), pattern_length, order ("0,1,2"), repeats, noise, seed.
GeneratorSpec load_generator_spec(const std::string& path) {
    const KeyValues kv = load_key_values(path);
    GeneratorSpec s;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("name")) s.name = *v;
    if (auto v = get("patterns")) s.patterns = parse_pattern_list(*v);
    if (auto v = get("pattern_length")) s.pattern_length = parse_uint(*v, "pattern_length");
    if (auto v = get("order"))
        for (const auto& idx : split(*v, ','))
            if (!idx.empty()) s.order.push_back(parse_uint(idx, "order"));
    if (auto v = get("repeats")) s.repeats = parse_uint(*v, "repeats");
    if (auto v = get("noise")) s.noise_level = parse_double(*v, "noise");
    if (auto v = get("seed")) s.seed = parse_uint(*v, "seed");
    return s;
}

int cmd_generate(const GenerateArgs& a, const CLI::App& app) {
    TimeSeries ts;
    KeyValues meta;
    if (!a.spec_file.empty() || a.preset == "sy4" || a.preset == "sy10") {
        GeneratorSpec spec;
        if (!a.spec_file.empty()) spec = load_generator_spec(a.spec_file);
        else if (a.preset == "sy4") spec = sy4_spec(a.noise, a.repeats, a.seed);
        else spec = sy10_spec(a.repeats, a.seed);
        // Flags given explicitly win over the spec file.
        if (app.count("--noise")) spec.noise_level = a.noise;
        if (app.count("--repeats")) spec.repeats = a.repeats;
        if (app.count("--seed")) spec.seed = a.seed;
        ts = generate(spec);
        meta["generator"] = spec.name;
        meta["noise"] = format_double(spec.noise_level);
        meta["repeats"] = std::to_string(spec.repeats);
        meta["seed"] = std::to_string(spec.seed);
        meta["pattern_length"] = std::to_string(spec.pattern_length);
        std::string pats;
        for (const auto& p : spec.patterns)
            pats += (pats.empty() ? "" : ";") + format_double(p.amplitude) + ":" + format_double(p.frequency);
        meta["patterns"] = pats;
    } else if (a.preset == "ar1" || a.preset == "randomwalk") {
        const double alpha = a.preset == "randomwalk" ? 1.0 : a.alpha;
        ts = gen_ar1(alpha, a.length, a.noise_std, a.seed);
        meta["generator"] = a.preset;
        meta["alpha"] = format_double(alpha);
        meta["length"] = std::to_string(a.length);
        meta["noise_std"] = format_double(a.noise_std);
        meta["seed"] = std::to_string(a.seed);
    } else {
        throw ConfigError("unknown generator preset '" + a.preset + "' (known: sy4, sy10, ar1, randomwalk)");
    }
    save_csv(ts, a.out);
    meta["samples"] = std::to_string(ts.size());
    write_sidecar(a.out, meta);
    std::cout << "wrote " << ts.size() << " samples to " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    ConfigFlags flags;
    std::string data;
    std::string model_out;
    std::string trace_out;
    bool verbose = false;
};

int cmd_train(const TrainArgs& a) {
    const TimeSeries ts = read_series(a.data);
    const T2PConfig cfg = a.flags.resolve();
    if (ts.size() < cfg.pattern_length)
        throw InputError("series of length " + std::to_string(ts.size()) + " is shorter than pattern length " +
                         std::to_string(cfg.pattern_length));
    const Segmentation seg = segment(ts, cfg.pattern_length);
    EpochObserver observer;
    if (a.verbose)
        observer = [](const EpochRecord& r) {
            std::cerr << "epoch " << r.epoch << " loss " << r.loss << " mse " << r.mse << " kl " << r.kl
                      << " sparsity " << r.sparsity << "\n";
        };
    const TrainResult result = train(seg.windows, cfg, observer);
    save_checkpoint(result.model, a.model_out);
    const std::string trace_path = a.trace_out.empty() ? a.model_out + ".trace.csv" : a.trace_out;
    std::ostringstream trace;
    write_trace_csv(trace, result.trace);
    write_text(trace_path, trace.str());

    KeyValues meta = with_prefix(cfg.to_key_values(), "config.");
    meta["data"] = a.data;
    meta["data.provenance"] = ts.provenance;
    meta["windows"] = std::to_string(seg.windows.size());
    write_sidecar(a.model_out, meta);
    if (!result.trace.epochs.empty()) {
        const auto& last = result.trace.epochs.back();
        std::cout << "trained " << cfg.epochs << " epochs; final loss " << format_double(last.loss)
                  << ", sparsity " << format_double(last.sparsity) << "\n";
    } else {
        std::cout << "trained 0 epochs\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeArgs {
    std::string model;
    std::string data;
    std::string out;
    std::optional<std::size_t> pattern_length;
};

void check_lengths(const T2PModel& model, const TimeSeries& ts, std::optional<std::size_t> requested) {
    const std::size_t m = model.pattern_length();
    if (requested && *requested != m)
        throw InputError("requested window length " + std::to_string(*requested) +
                         " does not match checkpoint pattern length " + std::to_string(m));
    if (ts.size() < m)
        throw InputError("series length " + std::to_string(ts.size()) + " is shorter than checkpoint pattern length " +
                         std::to_string(m));
}

int cmd_summarize(const SummarizeArgs& a) {
    const T2PModel model = load_checkpoint(a.model);
    const TimeSeries ts = read_series(a.data);
    check_lengths(model, ts, a.pattern_length);
    const Summary s = summarize(model, ts);
    const PatternSet ps = extract_patterns(model);

    std::ostringstream assignments, patterns;
    write_assignments_csv(assignments, s);
    write_patterns_csv(patterns, ps);
    write_text(a.out + ".assignments.csv", assignments.str());
    write_text(a.out + ".patterns.csv", patterns.str());
    write_text(a.out + ".svg", svg::summary_plot(ts.samples, s));
    write_text(a.out + ".patterns.svg", svg::pattern_plot(ps));

    KeyValues meta = with_prefix(model.config().to_key_values(), "config.");
    meta["model"] = a.model;
    meta["data"] = a.data;
    write_sidecar(a.out + ".assignments.csv", meta);
    std::cout << "assigned " << s.size() << " windows to " << ps.size() << " patterns\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::vector<std::string> models;
    std::string assignments;
    std::optional<std::size_t> pattern_length;
    std::string data;
    std::string dataset;
    std::optional<double> mse_threshold;
    std::string out;
    std::string report;
};

nlohmann::ordered_json report_json(const std::string& dataset, const std::vector<EvalReport>& reports) {
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json run;
        run["seed"] = r.seed;
        run["compression"] = r.compression;
        run["precision"] = r.precision ? nlohmann::ordered_json(*r.precision) : nlohmann::ordered_json(nullptr);
        run["recall"] = r.recall ? nlohmann::ordered_json(*r.recall) : nlohmann::ordered_json(nullptr);
        run["description_lengths"] = {{"dl_T", r.lengths.dl_T},
                                      {"dl_P", r.lengths.dl_P},
                                      {"dl_T_given_P", r.lengths.dl_T_given_P},
                                      {"dl_penalty", r.lengths.dl_penalty}};
        runs.push_back(run);
    }
    return {{"dataset", dataset}, {"runs", runs}};
}

int cmd_evaluate(const EvaluateArgs& a) {
    if (a.models.empty() == a.assignments.empty())
        throw InputError("evaluate needs exactly one of --model or --assignments");
    const TimeSeries ts = read_series(a.data);
    const std::string dataset = a.dataset.empty() ? fs::path(a.data).stem().string() : a.dataset;

    std::vector<EvalReport> reports;
    if (!a.assignments.empty()) {
        if (!a.pattern_length) throw InputError("--assignments requires --pattern-length");
        if (!ts.labeled() && !a.mse_threshold)
            throw InputError("--assignments on unlabeled data is not supported: no reconstructions to threshold");
        std::ifstream in(a.assignments);
        if (!in) throw InputError("cannot open assignments '" + a.assignments + "'");
        const Summary s = parse_assignments_csv(in, ts.size(), *a.pattern_length);
        const Scores sc = score_summary(ts, s, a.mse_threshold);
        reports.push_back({dataset, 0, sc.compression, sc.precision, sc.recall, {}, sc.lengths});
    } else {
        reports.resize(a.models.size());
        parallel_for(a.models.size(), worker_count(), [&](std::size_t i) {
            const T2PModel model = load_checkpoint(a.models[i]);
            check_lengths(model, ts, a.pattern_length);
            const Scores sc = score_summary(ts, summarize(model, ts), a.mse_threshold);
            reports[i] = {dataset, model.config().seed, sc.compression, sc.precision, sc.recall, {}, sc.lengths};
        });
    }

    std::ostringstream out;
    write_eval_csv_header(out);
    for (const auto& r : reports) write_eval_csv_row(out, r);
    // Aggregate rows: seed column holds "mean" / "std".
    std::vector<double> comp, prec, rec;
    for (const auto& r : reports) {
        comp.push_back(r.compression);
        if (r.precision) prec.push_back(*r.precision);
        if (r.recall) rec.push_back(*r.recall);
    }
    const MeanStd c = mean_std(comp), p = mean_std(prec), q = mean_std(rec);
    const bool labeled = !prec.empty();
    if (!a.report.empty()) {
        auto doc = report_json(dataset, reports);
        const auto stat = [&](const MeanStd& ms, bool present) {
            return present ? nlohmann::ordered_json{{"mean", ms.mean}, {"std", ms.stddev}}
                           : nlohmann::ordered_json(nullptr);
        };
        doc["aggregate"] = {{"compression", stat(c, true)},
                            {"precision", stat(p, labeled)},
                            {"recall", stat(q, labeled)}};
        write_text(a.report, doc.dump(2) + "\n");
    }
    out << dataset << ",mean," << format_double(c.mean) << ',' << (labeled ? format_double(p.mean) : "") << ','
        << (labeled ? format_double(q.mean) : "") << '\n';
    out << dataset << ",std," << format_double(c.stddev) << ',' << (labeled ? format_double(p.stddev) : "") << ','
        << (labeled ? format_double(q.stddev) : "") << '\n';

    if (a.out.empty()) {
        std::cout << out.str();
    } else {
        write_text(a.out, out.str());
        KeyValues meta;
        meta["data"] = a.data;
        std::string models;
        for (const auto& m : a.models) models += (models.empty() ? "" : ";") + m;
        meta["models"] = models;
        meta["assignments"] = a.assignments;
        if (a.mse_threshold) meta["mse_threshold"] = format_double(*a.mse_threshold);
        write_sidecar(a.out, meta);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    ConfigFlags flags;
    std::string data;
    std::vector<std::size_t> ks;
    std::vector<std::size_t> ms;
    std::vector<std::uint64_t> seeds{0};
    std::string out;
};

int cmd_sweep(const SweepArgs& a) {
    const TimeSeries ts = read_series(a.data);
    T2PConfig base = a.flags.resolve();
    const fs::path dir(a.out);
    fs::create_directories(dir);
    const SweepResult r = run_sweep(ts, a.ks, a.ms, a.seeds, base, dir / "cells", worker_count());
    for (const auto& c : r.cells)
        if (!c.compression) std::cerr << "warning: skipped k=" << c.k << " m=" << c.m << ": " << c.warning << "\n";

    std::ostringstream csv;
    write_sweep_csv(csv, r);
    write_text((dir / "sweep.csv").string(), csv.str());
    std::vector<double> grid;
    for (const auto& c : r.cells) grid.push_back(c.compression ? *c.compression : std::nan(""));
    write_text((dir / "sweep.svg").string(), svg::heatmap(r.ks, r.ms, grid));
    KeyValues meta = with_prefix(base.to_key_values(), "config.");
    meta["data"] = a.data;
    std::string seeds;
    for (auto s : a.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
    meta["seeds"] = seeds;
    write_sidecar((dir / "sweep.csv").string(), meta);

    if (const SweepCell* b = r.best())
        std::cout << "argmax k=" << b->k << " m=" << b->m << " compression=" << format_double(*b->compression)
                  << "\n";
    else
        std::cout << "argmax none: every cell was skipped\n";
    return 0;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineArgs {
    std::string data;
    std::string method;
    std::size_t m = 100;
    std::size_t k = 4;
    std::optional<std::size_t> segments;
    std::optional<std::size_t> band;
    std::string out;
};

const std::vector<std::string>& baseline_methods() {
    static const std::vector<std::string> methods{"dendrogram-ed", "dendrogram-dtw", "snippets"};
    return methods;
}

int cmd_baseline(const BaselineArgs& a) {
    const TimeSeries ts = read_series(a.data);
    KeyValues meta;
    meta["data"] = a.data;
    meta["method"] = a.method;

    if (a.method == "snippets") {
        const SnippetResult r = greedy_snippets(ts, a.m, a.k);
        const Summary s = snippet_summary(ts, r);
        std::ostringstream snippets, assignments;
        snippets << "snippet,start,length\n";
        for (std::size_t i = 0; i < r.starts.size(); ++i) snippets << i << ',' << r.starts[i] << ',' << a.m << '\n';
        write_assignments_csv(assignments, s);
        write_text(a.out + ".snippets.csv", snippets.str());
        write_text(a.out + ".assignments.csv", assignments.str());
        write_text(a.out + ".svg", svg::summary_plot(ts.samples, s));
        meta["m"] = std::to_string(a.m);
        meta["k"] = std::to_string(a.k);
        write_sidecar(a.out + ".snippets.csv", meta);
        if (ts.labeled()) std::cout << "compression " << format_double(score_summary(ts, s).compression) << "\n";
        std::cout << "selected " << r.starts.size() << " snippets\n";
        return 0;
    }

    // Dendrograms: either --segments equal-length regions or windows of length m.
    std::vector<std::vector<double>> parts;
    if (a.segments) {
        if (*a.segments < 2 || ts.size() < *a.segments)
            throw InputError("cannot cut a series of length " + std::to_string(ts.size()) + " into " +
                             std::to_string(*a.segments) + " segments");
        const std::size_t len = ts.size() / *a.segments;
        for (std::size_t i = 0; i < *a.segments; ++i)
            parts.emplace_back(ts.samples.begin() + static_cast<std::ptrdiff_t>(i * len),
                               ts.samples.begin() + static_cast<std::ptrdiff_t>((i + 1) * len));
        meta["segments"] = std::to_string(*a.segments);
    } else {
        parts = segment(ts, a.m).windows;
        meta["m"] = std::to_string(a.m);
    }
    DistanceMatrix d;
    if (a.method == "dendrogram-ed") {
        d = pairwise_distances(parts, [](const auto& x, const auto& y) { return znorm_ed(x, y); });
    } else {
        const auto band = a.band;
        d = pairwise_distances(parts, [band](const auto& x, const auto& y) {
            return dtw(znormalize(x), znormalize(y), band);
        });
        if (band) meta["band"] = std::to_string(*band);
    }
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < parts.size(); ++i) labels.push_back("S" + std::to_string(i + 1));
    const Dendrogram dg = complete_linkage(d, labels);
    std::ostringstream linkage;
    write_linkage_csv(linkage, dg);
    write_text(a.out + ".linkage.csv", linkage.str());
    write_text(a.out + ".svg", svg::dendrogram(dg));
    write_sidecar(a.out + ".linkage.csv", meta);
    std::cout << "wrote " << dg.merges.size() << " merges\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    ConfigFlags flags;
    std::vector<std::size_t> sizes{4000, 8000, 16000};
    std::size_t repeats = 3;
    std::string out;
};

int cmd_bench(const BenchArgs& a) {
    ConfigFlags flags = a.flags;
    if (flags.preset.empty()) flags.preset = "sy4";
    const T2PConfig cfg = flags.resolve();
    const std::size_t block = 4 * cfg.pattern_length;
    auto generator = [&](std::size_t size) {
        if (size < block || size % block != 0)
            throw InputError("bench size " + std::to_string(size) + " must be a positive multiple of " +
                             std::to_string(block));
        GeneratorSpec spec = sy4_spec(0.0, size / block, cfg.seed);
        spec.pattern_length = cfg.pattern_length;
        return segment(generate(spec), cfg.pattern_length).windows;
    };
    auto trainer = [&](const std::vector<std::vector<double>>& windows) { train(windows, cfg); };
    const auto rows = bench_runtime(generator, a.sizes, trainer, a.repeats);
    std::ostringstream csv;
    write_bench_csv(csv, rows);
    if (a.out.empty()) std::cout << csv.str();
    else write_text(a.out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-to-Pattern: summarize time series with a small set of learned patterns"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic series as CSV");
    g->add_option("--preset", gen.preset, "sy4, sy10, ar1 or randomwalk");
    g->add_option("--spec", gen.spec_file, "Generator spec file (overrides --preset)");
    g->add_option("--noise", gen.noise, "Noise level in percent of the clean series' std");
    g->add_option("--repeats", gen.repeats, "Repetitions of the pattern block");
    g->add_option("--seed", gen.seed, "Noise seed");
    g->add_option("--length", gen.length, "Length for ar1 / randomwalk");
    g->add_option("--alpha", gen.alpha, "AR(1) coefficient");
    g->add_option("--noise-std", gen.noise_std, "AR(1) innovation std");
    g->add_option("-o,--out", gen.out, "Output CSV")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model on a series");
    tr.flags.add_to(t);
    t->add_option("--data", tr.data, "Input CSV")->required();
    t->add_option("--model", tr.model_out, "Checkpoint to write")->required();
    t->add_option("--trace", tr.trace_out, "Trace CSV (default: <model>.trace.csv)");
    t->add_flag("-v,--verbose", tr.verbose, "Print every epoch");

    SummarizeArgs sm;
    auto* s = app.add_subcommand("summarize", "Assign windows to learned patterns");
    s->add_option("--model", sm.model, "Checkpoint")->required();
    s->add_option("--data", sm.data, "Input CSV")->required();
    s->add_option("-o,--out", sm.out, "Output prefix")->required();
    s->add_option("-m,--pattern-length", sm.pattern_length, "Expected window length");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Compression, precision and recall");
    e->add_option("--model", ev.models, "Checkpoint(s), one per seed");
    e->add_option("--assignments", ev.assignments, "Assignment CSV instead of a model");
    e->add_option("-m,--pattern-length", ev.pattern_length, "Window length");
    e->add_option("--data", ev.data, "Input CSV (labels enable precision / recall)")->required();
    e->add_option("--dataset", ev.dataset, "Dataset name for the report");
    e->add_option("--mse-threshold", ev.mse_threshold, "tau for unlabeled data");
    e->add_option("-o,--out", ev.out, "Output CSV (default: stdout)");
    e->add_option("--report", ev.report, "Structured JSON report");

    SweepArgs sw;
    auto* w = app.add_subcommand("sweep", "Compression over a pattern-count x pattern-length grid");
    sw.flags.add_to(w);
    w->add_option("--data", sw.data, "Input CSV")->required();
    w->add_option("--ks", sw.ks, "Pattern counts")->required()->delimiter(',');
    w->add_option("--ms", sw.ms, "Pattern lengths")->required()->delimiter(',');
    w->add_option("--seeds", sw.seeds, "Seeds per cell")->delimiter(',');
    w->add_option("-o,--out", sw.out, "Output directory")->required();

    BaselineArgs bl;
    auto* b = app.add_subcommand("baseline", "Similarity-search baselines");
    b->add_option("--data", bl.data, "Input CSV")->required();
    b->add_option("--method", bl.method, "dendrogram-ed, dendrogram-dtw or snippets")->required();
    b->add_option("-m,--pattern-length", bl.m, "Window length");
    b->add_option("-k,--n-patterns", bl.k, "Snippet count");
    b->add_option("--segments", bl.segments, "Cut the series into this many equal regions (dendrograms)");
    b->add_option("--band", bl.band, "Sakoe-Chiba half-width for DTW");
    b->add_option("-o,--out", bl.out, "Output prefix")->required();

    BenchArgs be;
    auto* n = app.add_subcommand("bench", "Training time versus series length");
    be.flags.add_to(n);
    n->add_option("--sizes", be.sizes, "Series lengths")->delimiter(',');
    n->add_option("--repeats", be.repeats, "Runs per size");
    n->add_option("-o,--out", be.out, "Output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitUsage;
    }

    try {
        if (*g) return cmd_generate(gen, *g);
        if (*t) return cmd_train(tr);
        if (*s) return cmd_summarize(sm);
        if (*e) return cmd_evaluate(ev);
        if (*w) return cmd_sweep(sw);
        if (*b) {
            const auto& ms = baseline_methods();
            if (std::find(ms.begin(), ms.end(), bl.method) == ms.end()) {
                std::cerr << "error: unknown method '" << bl.method
                          << "' (known: dendrogram-ed, dendrogram-dtw, snippets)\n";
                return kExitUsage;
            }
            return cmd_baseline(bl);
        }
        if (*n) return cmd_bench(be);
    } catch (const NumericalError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
