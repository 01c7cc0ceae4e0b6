#pragma once

// Similarity-search reference methods: z-normalized Euclidean distance, DTW,
// complete-linkage agglomerative clustering and a greedy snippet selector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "t2p/config.hpp"
#include "t2p/data.hpp"
#include "t2p/errors.hpp"
#include "t2p/summary.hpp"

namespace t2p {

/// Subtract the mean, divide by the (population) standard deviation.
/// Constant windows map to the zero vector.
inline std::vector<double> znormalize(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    if (out.empty()) return out;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(x.size()));
    for (auto& v : out) v = sd < 1e-12 ? 0.0 : (v - mean) / sd;
    return out;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("euclidean: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                             " differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double znorm_ed(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("znorm_ed: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                             " differ");
    return euclidean(znormalize(a), znormalize(b));
}

/// Dynamic time warping with squared point cost and steps (1,0), (0,1), (1,1);
/// returns sqrt of the cheapest accumulated cost. `band` is a Sakoe-Chiba
/// half-width; infinity is returned when no path fits inside it.
inline double dtw(std::span<const double> a, std::span<const double> b, std::optional<std::size_t> band = {}) {
    if (a.empty() || b.empty()) throw ContractError("dtw: empty input");
    const std::size_t n = a.size(), m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        std::size_t lo = 1, hi = m;
        if (band) {
            lo = i > *band ? std::max<std::size_t>(1, i - *band) : 1;
            hi = std::min(m, i + *band);
        }
        for (std::size_t j = lo; j <= hi; ++j) {
            const double d = a[i - 1] - b[j - 1];
            cur[j] = d * d + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return std::sqrt(prev[m]);
}

/// Dense symmetric n x n matrix.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    explicit DistanceMatrix(std::size_t size = 0) : n(size), values(size * size, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

template <typename Metric>
DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& items, Metric&& metric) {
    DistanceMatrix d(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size(); ++j) d.at(i, j) = d.at(j, i) = metric(items[i], items[j]);
    return d;
}

struct Merge {
    std::size_t left = 0;   // cluster ids: leaves 0..n-1, the i-th merge creates id n+i
    std::size_t right = 0;
    double distance = 0.0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::vector<Merge> merges;
    std::vector<std::string> leaf_labels;

    std::size_t leaves() const noexcept { return leaf_labels.size(); }
};

/// Agglomerative clustering with the max-linkage rule. Ties go to the
/// lexicographically smallest (left id, right id) pair.
inline Dendrogram complete_linkage(const DistanceMatrix& dist, std::vector<std::string> labels = {}) {
    const std::size_t n = dist.n;
    if (n == 0) throw InputError("complete_linkage: empty distance matrix");
    for (std::size_t i = 0; i < n; ++i) {
        if (dist.at(i, i) != 0.0) throw InputError("complete_linkage: non-zero diagonal at " + std::to_string(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = dist.at(i, j), b = dist.at(j, i);
            if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
                throw InputError("complete_linkage: matrix is not symmetric at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
        }
    }
    if (labels.empty())
        for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
    if (labels.size() != n) throw InputError("complete_linkage: label count does not match matrix size");

    // Slot i holds cluster id ids[i]; inter-cluster distances live in a working copy.
    std::vector<double> d = dist.values;
    std::vector<std::size_t> ids(n), sizes(n, 1);
    std::vector<bool> active(n, true);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i;

    Dendrogram out;
    out.leaf_labels = std::move(labels);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> best_ids{std::numeric_limits<std::size_t>::max(), 0};
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double v = d[i * n + j];
                const std::pair<std::size_t, std::size_t> pair_ids{std::min(ids[i], ids[j]), std::max(ids[i], ids[j])};
                if (v < best || (v == best && pair_ids < best_ids)) {
                    best = v;
                    bi = i;
                    bj = j;
                    best_ids = pair_ids;
                }
            }
        }
        out.merges.push_back({best_ids.first, best_ids.second, best, sizes[bi] + sizes[bj]});
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double v = std::max(d[bi * n + k], d[bj * n + k]);
            d[bi * n + k] = d[k * n + bi] = v;
        }
        active[bj] = false;
        sizes[bi] += sizes[bj];
        ids[bi] = n + step;
    }
    return out;
}

inline void write_linkage_csv(std::ostream& out, const Dendrogram& dg) {
    out << "left,right,distance,size\n";
    for (const auto& m : dg.merges)
        out << m.left << ',' << m.right << ',' << format_double(m.distance) << ',' << m.size << '\n';
}

// ---------------------------------------------------------------------------
// Greedy snippets

struct SnippetResult {
    std::size_t window_length = 0;
    std::vector<std::size_t> starts;          // sample offset of each chosen snippet, in pick order
    std::vector<std::size_t> assignment;      // per window: index into `starts`
    std::vector<double> assignment_distance;  // per window: z-normalized ED to its snippet
    std::vector<double> coverage;             // total coverage after each pick
};

/// Picks k of the non-overlapping length-m windows, each time the one that most
/// lowers sum_w min(coverage(w), znorm_ed(candidate, w)).
inline SnippetResult greedy_snippets(const TimeSeries& series, std::size_t m, std::size_t k) {
    if (m == 0 || k == 0) throw InputError("greedy_snippets: m and k must be positive");
    if (series.size() < m * k)
        throw InputError("greedy_snippets: series of length " + std::to_string(series.size()) +
                         " cannot hold " + std::to_string(k) + " windows of length " + std::to_string(m));
    const Segmentation seg = segment(series, m);
    const std::size_t nw = seg.windows.size();
    std::vector<std::vector<double>> normalized;
    for (const auto& w : seg.windows) normalized.push_back(znormalize(w));
    const DistanceMatrix d = pairwise_distances(normalized, [](const auto& a, const auto& b) { return euclidean(a, b); });

    SnippetResult r;
    r.window_length = m;
    std::vector<double> cover(nw, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(nw, false);
    std::vector<std::size_t> picks;
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t best_c = nw;
        double best_total = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < nw; ++c) {
            if (chosen[c]) continue;
            double total = 0.0;
            for (std::size_t w = 0; w < nw; ++w) total += std::min(cover[w], d.at(c, w));
            if (best_c == nw || total < best_total) {
                best_total = total;
                best_c = c;
            }
        }
        chosen[best_c] = true;
        picks.push_back(best_c);
        for (std::size_t w = 0; w < nw; ++w) cover[w] = std::min(cover[w], d.at(best_c, w));
        r.coverage.push_back(best_total);
    }
    for (auto c : picks) r.starts.push_back(c * m);
    for (std::size_t w = 0; w < nw; ++w) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < picks.size(); ++s)
            if (d.at(picks[s], w) < d.at(picks[best], w)) best = s;
        r.assignment.push_back(best);
        r.assignment_distance.push_back(d.at(picks[best], w));
    }
    return r;
}

/// Expresses a snippet selection as a Summary. Score is the Pearson correlation
/// implied by the z-normalized distance, 1 - d^2 / (2m), clipped to [0, 1].
inline Summary snippet_summary(const TimeSeries& series, const SnippetResult& r) {
    const std::size_t m = r.window_length;
    Summary s;
    s.series_length = series.size();
    s.window_length = m;
    s.n_patterns = r.starts.size();
    s.remainder = series.size() % m;
    for (std::size_t w = 0; w < r.assignment.size(); ++w) {
        const double d = r.assignment_distance[w];
        const double score = std::clamp(1.0 - d * d / (2.0 * static_cast<double>(m)), 0.0, 1.0);
        const std::size_t snip = r.starts[r.assignment[w]];
        double mse = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double diff = series.samples[w * m + i] - series.samples[snip + i];
            mse += diff * diff;
        }
        s.windows.push_back({w, w * m, r.assignment[w], score, mse / static_cast<double>(m)});
    }
    return s;
}

}  // namespace t2p
