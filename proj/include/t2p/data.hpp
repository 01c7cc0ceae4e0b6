#pragma once

// Time series containers, synthetic benchmark generators, segmentation and CSV I/O.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "t2p/config.hpp"
#include "t2p/errors.hpp"

namespace t2p {

struct TimeSeries {
    std::vector<double> samples;
    std::vector<int> labels;  // one ground-truth pattern id per sample, or empty
    double sample_rate = 1.0;
    std::string provenance;

    std::size_t size() const noexcept { return samples.size(); }
    bool labeled() const noexcept { return !labels.empty(); }

    void validate() const {
        if (labeled() && labels.size() != samples.size())
            throw InputError("series has " + std::to_string(samples.size()) + " samples but " +
                             std::to_string(labels.size()) + " labels");
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!std::isfinite(samples[i])) throw InputError("non-finite sample at index " + std::to_string(i));
    }
};

/// One sinusoidal pattern: amplitude * sin(2 pi * frequency * t / length).
struct PatternDef {
    double amplitude = 1.0;
    double frequency = 1.0;  // cycles per window
};

struct GeneratorSpec {
    std::string name = "custom";
    std::vector<PatternDef> patterns;
    std::size_t pattern_length = 100;
    std::vector<std::size_t> order;  // block order; empty means 0..n-1
    std::size_t repeats = 10;
    double noise_level = 0.0;  // percent of the clean series' standard deviation
    std::uint64_t seed = 0;

    void validate() const {
        if (patterns.empty()) throw ConfigError("generator needs at least one pattern");
        if (pattern_length < 9) throw ConfigError("pattern length must be at least 9");
        if (repeats < 1) throw ConfigError("repeats must be at least 1");
        if (!(noise_level >= 0.0 && noise_level <= 100.0)) throw ConfigError("noise level must be in [0,100]");
        for (auto idx : order)
            if (idx >= patterns.size())
                throw ConfigError("block order references pattern " + std::to_string(idx) + " of " +
                                  std::to_string(patterns.size()));
    }
};

inline std::vector<double> render_pattern(const PatternDef& p, std::size_t length) {
    std::vector<double> out(length);
    for (std::size_t t = 0; t < length; ++t)
        out[t] = p.amplitude * std::sin(2.0 * std::numbers::pi * p.frequency * static_cast<double>(t) /
                                        static_cast<double>(length));
    return out;
}

inline GeneratorSpec sy4_spec(double noise_level = 0.0, std::size_t repeats = 10, std::uint64_t seed = 0) {
    GeneratorSpec s;
    s.name = "sy4";
    s.patterns = {{1.0, 1.0}, {1.0, 3.0}, {2.0, 1.0}, {2.0, 3.0}};
    s.noise_level = noise_level;
    s.repeats = repeats;
    s.seed = seed;
    return s;
}

inline GeneratorSpec sy10_spec(std::size_t repeats = 10, std::uint64_t seed = 0) {
    GeneratorSpec s;
    s.name = "sy10";
    for (double amp : {1.0, 2.0})
        for (double freq : {1.0, 2.0, 3.0, 4.0, 5.0}) s.patterns.push_back({amp, freq});
    s.repeats = repeats;
    s.seed = seed;
    return s;
}

inline double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Adds N(0, (level/100 * std(series))^2) to every sample; labels are kept.
inline TimeSeries add_gaussian_noise(const TimeSeries& series, double level, std::uint64_t seed) {
    if (!(level >= 0.0 && level <= 100.0)) throw DomainError("noise level must be in [0,100]");
    TimeSeries out = series;
    if (level == 0.0) return out;
    const double sigma = level / 100.0 * population_std(series.samples);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& x : out.samples) x += sigma * noise(rng);
    return out;
}

inline TimeSeries generate(const GeneratorSpec& spec) {
    spec.validate();
    std::vector<std::size_t> order = spec.order;
    if (order.empty())
        for (std::size_t i = 0; i < spec.patterns.size(); ++i) order.push_back(i);
    std::vector<std::vector<double>> rendered;
    for (const auto& p : spec.patterns) rendered.push_back(render_pattern(p, spec.pattern_length));

    TimeSeries ts;
    ts.samples.reserve(order.size() * spec.repeats * spec.pattern_length);
    for (std::size_t r = 0; r < spec.repeats; ++r)
        for (auto idx : order) {
            ts.samples.insert(ts.samples.end(), rendered[idx].begin(), rendered[idx].end());
            ts.labels.insert(ts.labels.end(), spec.pattern_length, static_cast<int>(idx));
        }
    ts = add_gaussian_noise(ts, spec.noise_level, spec.seed);
    ts.provenance = "generator=" + spec.name + ";noise=" + format_double(spec.noise_level) +
                    ";repeats=" + std::to_string(spec.repeats) + ";seed=" + std::to_string(spec.seed);
    return ts;
}

inline TimeSeries gen_sy4(double noise_level, std::size_t repeats, std::uint64_t seed) {
    return generate(sy4_spec(noise_level, repeats, seed));
}

inline TimeSeries gen_sy10(std::size_t repeats, std::uint64_t seed) { return generate(sy10_spec(repeats, seed)); }

/// X_0 = 0, X_t = alpha X_{t-1} + eps_t with eps_t ~ N(0, noise_std^2).
inline TimeSeries gen_ar1(double alpha, std::size_t n, double noise_std, std::uint64_t seed) {
    if (n < 1) throw ConfigError("AR(1) length must be at least 1");
    TimeSeries ts;
    ts.samples.resize(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    double prev = 0.0;
    ts.samples[0] = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        prev = alpha * prev + noise_std * noise(rng);
        ts.samples[t] = prev;
    }
    ts.provenance = "generator=ar1;alpha=" + format_double(alpha) + ";seed=" + std::to_string(seed);
    return ts;
}

/// Non-overlapping windows of length m; the trailing remainder is dropped.
struct Segmentation {
    std::size_t window_length = 0;
    std::vector<std::vector<double>> windows;
    std::vector<int> labels;  // majority label per window when the series is labeled
    std::vector<bool> mixed;  // true when a window's samples carry more than one label
    std::size_t remainder = 0;
};

inline Segmentation segment(const TimeSeries& series, std::size_t m) {
    if (m == 0) throw InputError("window length must be positive");
    if (series.size() < m)
        throw InputError("series of length " + std::to_string(series.size()) + " is shorter than window length " +
                         std::to_string(m));
    Segmentation seg;
    seg.window_length = m;
    const std::size_t count = series.size() / m;
    seg.remainder = series.size() - count * m;
    for (std::size_t w = 0; w < count; ++w) {
        const auto begin = series.samples.begin() + static_cast<std::ptrdiff_t>(w * m);
        seg.windows.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(m));
        if (series.labeled()) {
            std::map<int, std::size_t> votes;
            for (std::size_t i = w * m; i < (w + 1) * m; ++i) ++votes[series.labels[i]];
            int best = votes.begin()->first;
            for (const auto& [label, count_] : votes)
                if (count_ > votes[best]) best = label;
            seg.labels.push_back(best);
            seg.mixed.push_back(votes.size() > 1);
        }
    }
    return seg;
}

// ---------------------------------------------------------------------------
// CSV: one value per row, optional integer label column, optional header.

inline TimeSeries parse_csv(std::istream& in, const std::string& origin = "<stream>") {
    TimeSeries ts;
    ts.provenance = "file=" + origin;
    std::string line;
    std::size_t lineno = 0;
    std::size_t columns = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (first_content) {
            first_content = false;
            double probe = 0.0;
            const auto& f0 = fields[0];
            const auto [ptr, ec] = std::from_chars(f0.data(), f0.data() + f0.size(), probe);
            if (ec != std::errc() || ptr != f0.data() + f0.size()) {
                if (fields.size() > 2) throw FormatError("header has " + std::to_string(fields.size()) + " columns");
                columns = fields.size();
                continue;
            }
        }
        if (columns == 0) columns = fields.size();
        if (columns > 2) throw FormatError("expected 1 or 2 columns, found " + std::to_string(columns));
        if (fields.size() != columns)
            throw FormatError("ragged row at line " + std::to_string(lineno) + ": expected " +
                              std::to_string(columns) + " columns, found " + std::to_string(fields.size()));
        double value = 0.0;
        const auto& vf = fields[0];
        const auto [vp, vec] = std::from_chars(vf.data(), vf.data() + vf.size(), value);
        if (vec != std::errc() || vp != vf.data() + vf.size() || vf.empty())
            throw ParseError("non-numeric value '" + vf + "'", lineno);
        ts.samples.push_back(value);
        if (columns == 2) {
            int label = 0;
            const auto& lf = fields[1];
            const auto [lp, lec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
            if (lec != std::errc() || lp != lf.data() + lf.size() || lf.empty())
                throw ParseError("non-integer label '" + lf + "'", lineno);
            ts.labels.push_back(label);
        }
    }
    ts.validate();
    return ts;
}

inline TimeSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return parse_csv(in, path);
}

inline void write_csv(std::ostream& out, const TimeSeries& series) {
    out << (series.labeled() ? "value,label\n" : "value\n");
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << format_double(series.samples[i]);
        if (series.labeled()) out << ',' << series.labels[i];
        out << '\n';
    }
}

inline void save_csv(const TimeSeries& series, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_csv(out, series);
    if (!out) throw InputError("write failed for '" + path + "'");
}

}  // namespace t2p
