#pragma once

// Glue shared by the command-line tool and the tests: scoring a summary
// against a series, CSV readers/writers for assignments, patterns and traces,
// a small worker pool, and the resumable (k, m) sweep.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "t2p/config.hpp"
#include "t2p/data.hpp"
#include "t2p/errors.hpp"
#include "t2p/eval.hpp"
#include "t2p/model.hpp"
#include "t2p/summary.hpp"

namespace t2p {

struct Scores {
    double compression = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> mse_threshold;  // set in unlabeled mode
    DescriptionLengths lengths;
};

/// Labeled series are scored against their window labels; unlabeled ones by
/// reconstruction MSE against `tau` (default: 95th percentile of the window MSEs).
inline Scores score_summary(const TimeSeries& series, const Summary& summary, std::optional<double> tau = {}) {
    Scores out;
    DlReference ref;
    if (series.labeled()) {
        const Segmentation seg = segment(series, summary.window_length);
        const PrecisionRecall pr = precision_recall(summary, seg.labels);
        out.precision = pr.precision;
        out.recall = pr.recall;
        ref.window_labels = seg.labels;
        ref.mixed_windows = seg.mixed;
    } else {
        ref.mse_threshold = tau ? *tau : default_mse_threshold(summary);
        out.mse_threshold = ref.mse_threshold;
    }
    out.lengths = description_lengths(series.size(), summary, ref);
    out.compression = compression(out.lengths);
    return out;
}

// ---------------------------------------------------------------------------
// CSV files

/// Columns: window_index,start,pattern_id,score
inline void write_assignments_csv(std::ostream& out, const Summary& s) {
    out << "window_index,start,pattern_id,score\n";
    for (const auto& w : s.windows)
        out << w.window_index << ',' << w.start << ',' << w.pattern_id << ',' << format_double(w.score) << '\n';
}

/// Reads an assignment CSV back into a Summary over a series of the given length.
inline Summary parse_assignments_csv(std::istream& in, std::size_t series_length, std::size_t window_length,
                                     std::size_t n_patterns = 0) {
    if (window_length == 0) throw InputError("assignments: window length must be positive");
    Summary s;
    s.series_length = series_length;
    s.window_length = window_length;
    s.remainder = series_length % window_length;
    std::string line;
    std::size_t lineno = 0;
    std::size_t max_id = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (lineno == 1 && !fields.empty() && trim(fields[0]) == "window_index") continue;
        if (fields.size() != 4)
            throw FormatError("assignments line " + std::to_string(lineno) + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
        WindowAssignment w;
        try {
            w.window_index = parse_uint(trim(fields[0]), "window_index");
            w.start = parse_uint(trim(fields[1]), "start");
            w.pattern_id = parse_uint(trim(fields[2]), "pattern_id");
            w.score = parse_double(trim(fields[3]), "score");
        } catch (const ConfigError& e) {
            throw ParseError(std::string("assignments: ") + e.what(), lineno);
        }
        if (w.window_index != s.windows.size())
            throw FormatError("assignments line " + std::to_string(lineno) + ": window indices must be consecutive");
        max_id = std::max(max_id, w.pattern_id);
        s.windows.push_back(w);
    }
    if (s.windows.size() != series_length / window_length)
        throw FormatError("assignments cover " + std::to_string(s.windows.size()) + " windows, series has " +
                          std::to_string(series_length / window_length));
    s.n_patterns = std::max(n_patterns, s.windows.empty() ? 0 : max_id + 1);
    return s;
}

/// Columns: pattern_id,position,value
inline void write_patterns_csv(std::ostream& out, const PatternSet& ps) {
    out << "pattern_id,position,value\n";
    for (std::size_t i = 0; i < ps.size(); ++i)
        for (std::size_t t = 0; t < ps.patterns[i].size(); ++t)
            out << i << ',' << t << ',' << format_double(ps.patterns[i][t]) << '\n';
}

/// Columns: epoch,loss,mse,kl,sparsity
inline void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
    out << "epoch,loss,mse,kl,sparsity\n";
    for (const auto& e : trace.epochs)
        out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.mse) << ',' << format_double(e.kl)
            << ',' << format_double(e.sparsity) << '\n';
}

inline TrainTrace parse_trace_csv(std::istream& in) {
    TrainTrace t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 5) throw FormatError("trace line " + std::to_string(lineno) + ": expected 5 fields");
        t.epochs.push_back({parse_uint(trim(f[0]), "epoch"), parse_double(trim(f[1]), "loss"),
                            parse_double(trim(f[2]), "mse"), parse_double(trim(f[3]), "kl"),
                            parse_double(trim(f[4]), "sparsity")});
    }
    return t;
}

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw InputError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw InputError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Workers

/// T2P_WORKERS if set to a positive integer, else 1.
inline std::size_t worker_count() {
    if (const char* v = std::getenv("T2P_WORKERS")) {
        try {
            const auto n = parse_uint(v, "T2P_WORKERS");
            if (n > 0) return n;
        } catch (const ConfigError&) {
        }
    }
    return 1;
}

/// Runs job(i) for i in [0, n) on up to `workers` threads. The first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepCell {
    std::size_t k = 0;
    std::size_t m = 0;
    std::optional<double> compression;  // mean over seeds; empty when skipped
    std::string warning;
};

struct SweepResult {
    std::vector<std::size_t> ks;
    std::vector<std::size_t> ms;
    std::vector<SweepCell> cells;  // row-major over (k, m)

    const SweepCell* best() const {
        const SweepCell* b = nullptr;
        for (const auto& c : cells)
            if (c.compression && (!b || *c.compression > *b->compression)) b = &c;
        return b;
    }
};

/// Trains one model per (k, m, seed). Each finished run is stored as
/// `cell_dir/k<k>_m<m>_s<seed>.txt`; existing files are reused, so an
/// interrupted sweep picks up where it stopped.
inline SweepResult run_sweep(const TimeSeries& series, const std::vector<std::size_t>& ks,
                             const std::vector<std::size_t>& ms, const std::vector<std::uint64_t>& seeds,
                             const T2PConfig& base, const std::filesystem::path& cell_dir, std::size_t workers) {
    if (ks.empty() || ms.empty() || seeds.empty()) throw ConfigError("sweep grid must not be empty");
    std::filesystem::create_directories(cell_dir);

    SweepResult result{ks, ms, {}};
    struct Job {
        std::size_t cell;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t ki = 0; ki < ks.size(); ++ki)
        for (std::size_t mi = 0; mi < ms.size(); ++mi) {
            SweepCell cell{ks[ki], ms[mi], std::nullopt, {}};
            if (ms[mi] < kMinPatternLength)
                cell.warning = "pattern length " + std::to_string(ms[mi]) + " is below the encoder minimum " +
                               std::to_string(kMinPatternLength);
            else if (series.size() < ms[mi])
                cell.warning = "series of length " + std::to_string(series.size()) + " is shorter than m=" +
                               std::to_string(ms[mi]);
            else if (series.size() / ms[mi] < 2)
                cell.warning = "m=" + std::to_string(ms[mi]) + " leaves fewer than 2 windows";
            if (cell.warning.empty())
                for (auto s : seeds) jobs.push_back({result.cells.size(), s});
            result.cells.push_back(cell);
        }

    std::vector<double> values(jobs.size(), 0.0);
    parallel_for(jobs.size(), workers, [&](std::size_t j) {
        const SweepCell& cell = result.cells[jobs[j].cell];
        const auto path = cell_dir / ("k" + std::to_string(cell.k) + "_m" + std::to_string(cell.m) + "_s" +
                                      std::to_string(jobs[j].seed) + ".txt");
        if (std::filesystem::exists(path)) {
            values[j] = parse_double(load_key_values(path.string()).at("compression"), "compression");
            return;
        }
        T2PConfig cfg = base;
        cfg.n_patterns = cell.k;
        cfg.pattern_length = cell.m;
        cfg.seed = jobs[j].seed;
        const Segmentation seg = segment(series, cell.m);
        const TrainResult trained = train(seg.windows, cfg);
        const Scores sc = score_summary(series, summarize(trained.model, series));
        KeyValues kv = cfg.to_key_values();
        kv["compression"] = format_double(sc.compression);
        write_file_atomic(path, to_text(kv));
        values[j] = sc.compression;
    });

    std::vector<std::vector<double>> per_cell(result.cells.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) per_cell[jobs[j].cell].push_back(values[j]);
    for (std::size_t c = 0; c < result.cells.size(); ++c)
        if (!per_cell[c].empty()) result.cells[c].compression = mean_std(per_cell[c]).mean;
    return result;
}

/// Columns: k,m,compression (blank for skipped cells).
inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
    out << "k,m,compression\n";
    for (const auto& c : r.cells)
        out << c.k << ',' << c.m << ',' << (c.compression ? format_double(*c.compression) : "") << '\n';
}

}  // namespace t2p
