#pragma once

// Summary quality metrics: pattern matching against ground truth, precision /
// recall, MDL description lengths and compression, Hoyer sparsity, and a
// runtime benchmark harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "t2p/config.hpp"
#include "t2p/errors.hpp"
#include "t2p/summary.hpp"

namespace t2p {

/// Learned pattern id -> ground-truth pattern id.
struct Matching {
    std::map<std::size_t, int> learned_to_truth;
    std::vector<int> truth_ids;  // every distinct ground-truth id, ascending

    std::optional<int> truth_of(std::size_t learned) const {
        auto it = learned_to_truth.find(learned);
        if (it == learned_to_truth.end()) return std::nullopt;
        return it->second;
    }
};

namespace detail {

inline void require_window_labels(const Summary& summary, std::span<const int> labels) {
    if (labels.size() != summary.size())
        throw InputError("got " + std::to_string(labels.size()) + " window labels for " +
                         std::to_string(summary.size()) + " windows");
}

}  // namespace detail

/// Greedy maximum-overlap matching: repeatedly pair the (learned, truth) ids
/// that share the most windows, each id used at most once. Ties go to the
/// lowest learned id, then the lowest truth id. Pairs with no overlap are never made.
inline Matching match_patterns(const Summary& summary, std::span<const int> labels) {
    detail::require_window_labels(summary, labels);
    std::map<std::pair<std::size_t, int>, std::size_t> overlap;
    std::set<int> truths;
    for (std::size_t w = 0; w < summary.size(); ++w) {
        ++overlap[{summary.windows[w].pattern_id, labels[w]}];
        truths.insert(labels[w]);
    }
    Matching m;
    m.truth_ids.assign(truths.begin(), truths.end());
    std::set<std::size_t> used_learned;
    std::set<int> used_truth;
    while (true) {
        std::size_t best = 0;
        std::pair<std::size_t, int> best_pair{};
        for (const auto& [pair, count] : overlap) {  // map order gives the tie-break
            if (used_learned.count(pair.first) || used_truth.count(pair.second)) continue;
            if (count > best) {
                best = count;
                best_pair = pair;
            }
        }
        if (best == 0) break;
        m.learned_to_truth[best_pair.first] = best_pair.second;
        used_learned.insert(best_pair.first);
        used_truth.insert(best_pair.second);
    }
    return m;
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// Precision: fraction of windows whose pattern maps to their label.
/// Recall: fraction of distinct ground-truth patterns that received a match.
inline PrecisionRecall precision_recall(const Summary& summary, std::span<const int> labels) {
    const Matching m = match_patterns(summary, labels);
    PrecisionRecall pr;
    if (summary.size() == 0) return pr;
    std::size_t correct = 0;
    for (std::size_t w = 0; w < summary.size(); ++w) {
        const auto truth = m.truth_of(summary.windows[w].pattern_id);
        if (truth && *truth == labels[w]) ++correct;
    }
    pr.precision = static_cast<double>(correct) / static_cast<double>(summary.size());
    pr.recall = m.truth_ids.empty()
                    ? 0.0
                    : static_cast<double>(m.learned_to_truth.size()) / static_cast<double>(m.truth_ids.size());
    return pr;
}

/// Description lengths, all in samples except dl_T_given_P (one unit per pointer).
struct DescriptionLengths {
    double dl_T = 0.0;
    double dl_P = 0.0;
    double dl_T_given_P = 0.0;
    double dl_penalty = 0.0;
};

/// How "incorrectly associated" windows are recognized.
struct DlReference {
    std::optional<std::vector<int>> window_labels;  // label mismatch after matching
    std::optional<double> mse_threshold;            // reconstruction MSE above tau
    std::vector<bool> mixed_windows;                // windows spanning several labels; never correct
};

inline DescriptionLengths description_lengths(std::size_t series_length, const Summary& summary,
                                              const DlReference& reference) {
    if (!reference.window_labels && !reference.mse_threshold)
        throw ConfigError("description lengths need window labels or an MSE threshold");
    std::vector<bool> correct(summary.size(), false);
    if (reference.window_labels) {
        const auto& labels = *reference.window_labels;
        const Matching m = match_patterns(summary, labels);
        for (std::size_t w = 0; w < summary.size(); ++w) {
            const auto truth = m.truth_of(summary.windows[w].pattern_id);
            correct[w] = truth && *truth == labels[w];
            if (w < reference.mixed_windows.size() && reference.mixed_windows[w]) correct[w] = false;
        }
    } else {
        const double tau = *reference.mse_threshold;
        for (std::size_t w = 0; w < summary.size(); ++w) correct[w] = summary.windows[w].reconstruction_mse <= tau;
    }
    DescriptionLengths dl;
    dl.dl_T = static_cast<double>(series_length);
    std::set<std::size_t> used;
    std::size_t good = 0;
    for (std::size_t w = 0; w < summary.size(); ++w) {
        if (correct[w]) {
            ++good;
            used.insert(summary.windows[w].pattern_id);
        }
    }
    const double m = static_cast<double>(summary.window_length);
    dl.dl_P = m * static_cast<double>(used.size());
    dl.dl_T_given_P = static_cast<double>(good);
    dl.dl_penalty = m * static_cast<double>(summary.size() - good);
    return dl;
}

/// DL(T) / (DL(P) + DL(T|P) + DL(penalty)); higher is better.
inline double compression(const DescriptionLengths& dl) {
    const double denom = dl.dl_P + dl.dl_T_given_P + dl.dl_penalty;
    if (!(denom > 0.0)) throw ContractError("compression: description-length denominator is zero");
    return dl.dl_T / denom;
}

/// Linear-interpolated percentile, q in [0, 100].
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ContractError("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Default tau for unlabeled data: 95th percentile of per-window reconstruction MSE.
inline double default_mse_threshold(const Summary& summary) {
    std::vector<double> mses;
    for (const auto& w : summary.windows) mses.push_back(w.reconstruction_mse);
    return percentile(std::move(mses), 95.0);
}

/// Hoyer's measure (sqrt(d) - |y|_1 / |y|_2) / (sqrt(d) - 1); 0 for a zero vector.
inline double hoyer_measure(std::span<const double> y) {
    if (y.size() < 2) throw ContractError("Hoyer measure needs at least 2 dimensions");
    double l1 = 0.0, l2 = 0.0;
    for (double v : y) {
        l1 += std::abs(v);
        l2 += v * v;
    }
    if (l2 == 0.0) return 0.0;
    const double sd = std::sqrt(static_cast<double>(y.size()));
    return (sd - l1 / std::sqrt(l2)) / (sd - 1.0);
}

/// Mean Hoyer measure of the rows of an n x d matrix after scaling every
/// column to unit standard deviation (near-constant columns are left as is).
inline double hoyer_sparsity(std::span<const double> matrix, std::size_t rows, std::size_t cols) {
    if (cols < 2) throw ContractError("hoyer_sparsity needs d >= 2, got " + std::to_string(cols));
    if (rows < 2) throw ContractError("hoyer_sparsity needs n >= 2, got " + std::to_string(rows));
    if (matrix.size() != rows * cols) throw DimensionError("hoyer_sparsity: matrix size mismatch");
    std::vector<double> scale(cols, 1.0);
    for (std::size_t c = 0; c < cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += matrix[r * cols + c];
        mean /= static_cast<double>(rows);
        double ss = 0.0;
        for (std::size_t r = 0; r < rows; ++r) ss += (matrix[r * cols + c] - mean) * (matrix[r * cols + c] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(rows));
        if (sd >= 1e-12) scale[c] = 1.0 / sd;
    }
    double total = 0.0;
    std::vector<double> row(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) row[c] = matrix[r * cols + c] * scale[c];
        total += hoyer_measure(row);
    }
    return total / static_cast<double>(rows);
}

inline double hoyer_sparsity(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ContractError("hoyer_sparsity needs n >= 2, got 0");
    std::vector<double> flat;
    for (const auto& r : rows) {
        if (r.size() != rows.front().size()) throw DimensionError("hoyer_sparsity: ragged rows");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return hoyer_sparsity(flat, rows.size(), rows.front().size());
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
    std::string dataset;
    std::uint64_t seed = 0;
    double compression = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    Matching matching;
    DescriptionLengths lengths;
};

inline void write_eval_csv_header(std::ostream& out) { out << "dataset,seed,compression,precision,recall\n"; }

inline void write_eval_csv_row(std::ostream& out, const EvalReport& r) {
    out << r.dataset << ',' << r.seed << ',' << format_double(r.compression) << ','
        << (r.precision ? format_double(*r.precision) : "") << ',' << (r.recall ? format_double(*r.recall) : "")
        << '\n';
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    for (double x : v) out.stddev += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(out.stddev / static_cast<double>(v.size()));
    return out;
}

inline double median(std::vector<double> v) { return percentile(std::move(v), 50.0); }

// ---------------------------------------------------------------------------
// Runtime benchmark

struct BenchRow {
    std::size_t size = 0;
    std::vector<double> seconds;
    double median_seconds = 0.0;
};

/// Times `trainer(generator(size))` `repeats` times per size and records the median.
template <typename Generator, typename Trainer>
std::vector<BenchRow> bench_runtime(Generator&& generator, std::span<const std::size_t> sizes, Trainer&& trainer,
                                    std::size_t repeats) {
    if (repeats < 1) throw ContractError("bench_runtime: repeats must be at least 1");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1]) throw ContractError("bench_runtime: sizes must be increasing");
    std::vector<BenchRow> rows;
    for (auto size : sizes) {
        BenchRow row;
        row.size = size;
        const auto data = generator(size);
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto start = std::chrono::steady_clock::now();
            trainer(data);
            const auto stop = std::chrono::steady_clock::now();
            row.seconds.push_back(std::chrono::duration<double>(stop - start).count());
        }
        row.median_seconds = median(row.seconds);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
    out << "size,median_seconds,runs\n";
    for (const auto& r : rows) {
        out << r.size << ',' << format_double(r.median_seconds) << ',';
        for (std::size_t i = 0; i < r.seconds.size(); ++i) out << (i ? ";" : "") << format_double(r.seconds[i]);
        out << '\n';
    }
}

}  // namespace t2p
