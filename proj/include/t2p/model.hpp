#pragma once

// Time-to-Pattern network.
//
//   window x [m]
//     -> conv(1->12, w3) relu -> conv(12->24, w3) relu -> maxpool(2, 2)
//     -> conv(24->32, w3) relu                          feature map [32 x m~]
//     -> dense head [32 m~ -> 2k], softplus             alpha1 [k], alpha2 [k]
//     -> BinConcrete latent z [k] (sums to one)
//     -> decoder: x^ = sum_i z_i * kernel_i             kernel bank [k x m]
//
// The loss is MSE(x, x^) plus a Monte-Carlo KL between the BinConcrete
// posterior (alpha1/alpha2, lambda1) and the prior (a, lambda2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "t2p/binconcrete.hpp"
#include "t2p/config.hpp"
#include "t2p/data.hpp"
#include "t2p/errors.hpp"
#include "t2p/eval.hpp"
#include "t2p/summary.hpp"
#include "t2p/tensor.hpp"

namespace t2p {

inline constexpr std::size_t kMinPatternLength = 10;
inline constexpr double kLocationFloor = 1e-6;

/// Length of the encoder feature map for window length m: floor((m - 4) / 2) - 2.
inline std::size_t encoded_length(std::size_t m) {
    if (m < kMinPatternLength)
        throw ConfigError("pattern length " + std::to_string(m) + " is too short; the encoder needs at least " +
                          std::to_string(kMinPatternLength));
    return (m - 4) / 2 - 2;
}

struct T2PConfig {
    std::size_t n_patterns = 4;
    std::size_t pattern_length = 100;
    double prior_location = 0.8;
    double lambda1 = 0.83;  // posterior temperature
    double lambda2 = 0.21;  // prior temperature
    std::size_t epochs = 1000;
    double learning_rate = 1e-3;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    KlMode kl_mode = KlMode::posterior_sampled;
    std::size_t mc_samples = 10;

    void validate() const {
        if (n_patterns < 1) throw ConfigError("n_patterns must be at least 1");
        encoded_length(pattern_length);
        if (!(prior_location > 0.0)) throw ConfigError("prior location must be positive");
        if (!(lambda1 > 0.0 && lambda1 <= 1.0)) throw ConfigError("lambda1 must lie in (0, 1]");
        if (!(lambda2 > 0.0 && lambda2 <= 1.0)) throw ConfigError("lambda2 must lie in (0, 1]");
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
        if (batch_size < 1) throw ConfigError("batch size must be at least 1");
        if (mc_samples < 1) throw ConfigError("MC sample count must be at least 1");
    }

    KeyValues to_key_values() const {
        KeyValues kv;
        kv["n_patterns"] = std::to_string(n_patterns);
        kv["pattern_length"] = std::to_string(pattern_length);
        kv["prior_location"] = format_double(prior_location);
        kv["lambda1"] = format_double(lambda1);
        kv["lambda2"] = format_double(lambda2);
        kv["epochs"] = std::to_string(epochs);
        kv["learning_rate"] = format_double(learning_rate);
        kv["batch_size"] = std::to_string(batch_size);
        kv["seed"] = std::to_string(seed);
        kv["kl_mode"] = kl_mode == KlMode::posterior_sampled ? "posterior" : "uniform";
        kv["mc_samples"] = std::to_string(mc_samples);
        return kv;
    }

    /// Overrides fields present in `kv`; unknown keys are ignored.
    void apply(const KeyValues& kv) {
        auto get = [&](const char* key) -> const std::string* {
            auto it = kv.find(key);
            return it == kv.end() ? nullptr : &it->second;
        };
        if (auto v = get("n_patterns")) n_patterns = parse_uint(*v, "n_patterns");
        if (auto v = get("pattern_length")) pattern_length = parse_uint(*v, "pattern_length");
        if (auto v = get("prior_location")) prior_location = parse_double(*v, "prior_location");
        if (auto v = get("lambda1")) lambda1 = parse_double(*v, "lambda1");
        if (auto v = get("lambda2")) lambda2 = parse_double(*v, "lambda2");
        if (auto v = get("epochs")) epochs = parse_uint(*v, "epochs");
        if (auto v = get("learning_rate")) learning_rate = parse_double(*v, "learning_rate");
        if (auto v = get("batch_size")) batch_size = parse_uint(*v, "batch_size");
        if (auto v = get("seed")) seed = parse_uint(*v, "seed");
        if (auto v = get("mc_samples")) mc_samples = parse_uint(*v, "mc_samples");
        if (auto v = get("kl_mode")) {
            if (*v == "posterior") kl_mode = KlMode::posterior_sampled;
            else if (*v == "uniform") kl_mode = KlMode::uniform_sampled;
            else throw ConfigError("kl_mode must be 'posterior' or 'uniform', got '" + *v + "'");
        }
    }
};

class T2PModel {
public:
    struct Encoding {
        DiffArray alpha1;
        DiffArray alpha2;
    };

    explicit T2PModel(const T2PConfig& config) : config_(config) {
        config_.validate();
        const std::size_t k = config_.n_patterns;
        const std::size_t m = config_.pattern_length;
        const std::size_t mt = encoded_length(m);
        std::mt19937_64 rng(config_.seed);
        auto uniform = [&](Shape shape, std::size_t fan_in) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::vector<double> v(shape_size(shape));
            for (auto& x : v) x = bound * (2.0 * open_uniform(rng) - 1.0);
            return DiffArray::parameter(std::move(v), std::move(shape));
        };
        params_.push_back(uniform({12, 1, 3}, 3));
        params_.push_back(uniform({12}, 3));
        params_.push_back(uniform({24, 12, 3}, 36));
        params_.push_back(uniform({24}, 36));
        params_.push_back(uniform({32, 24, 3}, 72));
        params_.push_back(uniform({32}, 72));
        params_.push_back(uniform({2 * k, 32 * mt}, 32 * mt));
        params_.push_back(uniform({2 * k}, 32 * mt));
        params_.push_back(uniform({k, m}, k));
    }

    T2PModel(const T2PModel& other) : config_(other.config_) {
        for (const auto& p : other.params_) params_.push_back(DiffArray::parameter(p.to_vector(), p.shape()));
    }
    T2PModel& operator=(const T2PModel& other) {
        if (this != &other) {
            T2PModel copy(other);
            *this = std::move(copy);
        }
        return *this;
    }
    T2PModel(T2PModel&&) noexcept = default;
    T2PModel& operator=(T2PModel&&) noexcept = default;

    static const std::vector<std::string>& parameter_names() {
        static const std::vector<std::string> names{
            "encoder.conv1.weight", "encoder.conv1.bias", "encoder.conv2.weight", "encoder.conv2.bias",
            "encoder.conv3.weight", "encoder.conv3.bias", "encoder.head.weight",  "encoder.head.bias",
            "decoder.kernels"};
        return names;
    }

    const T2PConfig& config() const noexcept { return config_; }
    std::size_t n_patterns() const noexcept { return config_.n_patterns; }
    std::size_t pattern_length() const noexcept { return config_.pattern_length; }

    std::vector<DiffArray>& parameters() noexcept { return params_; }
    const std::vector<DiffArray>& parameters() const noexcept { return params_; }
    const DiffArray& kernels() const { return params_[8]; }

    Encoding encode(const DiffArray& x) const {
        if (x.size() != config_.pattern_length)
            throw DimensionError("encode: window length " + std::to_string(x.size()) + " != pattern length " +
                                 std::to_string(config_.pattern_length));
        const DiffArray in = x.rank() == 2 ? x : reshape(x, Shape{1, x.size()});
        DiffArray h = relu(conv1d(in, params_[0], 1, 0, params_[1]));
        h = relu(conv1d(h, params_[2], 1, 0, params_[3]));
        h = maxpool1d(h, 2, 2);
        h = relu(conv1d(h, params_[4], 1, 0, params_[5]));
        const DiffArray head = clamp_min(softplus(linear(params_[6], flatten(h), params_[7])), kLocationFloor);
        const std::size_t k = config_.n_patterns;
        return {slice(head, 0, k), slice(head, k, k)};
    }

    Encoding encode(std::span<const double> x) const {
        return encode(DiffArray::constant(std::vector<double>(x.begin(), x.end())));
    }

    /// x^ = sum_i z_i * kernel_i.
    DiffArray decode(const DiffArray& z) const {
        if (z.size() != config_.n_patterns)
            throw DimensionError("decode: latent length " + std::to_string(z.size()) + " != n_patterns " +
                                 std::to_string(config_.n_patterns));
        return vecmat(z, params_[8]);
    }

    std::vector<double> decode(std::span<const double> z) const {
        return decode(DiffArray::constant(std::vector<double>(z.begin(), z.end()))).to_vector();
    }

    /// Latent at the distribution's median draw (U = 0.5 in every dimension).
    std::vector<double> latent_mean(std::span<const double> x) const;

private:
    T2PConfig config_;
    std::vector<DiffArray> params_;
};

struct LossTerms {
    DiffArray total;  // differentiable batch mean of MSE + KL
    double mse = 0.0;
    double kl = 0.0;
    std::vector<std::vector<double>> latent_means;  // per window, U = 0.5
};

/// z = softmax(sigmoid(ln(alpha1 / alpha2) / lambda1) * alpha1), the U = 0.5 latent, without a graph.
inline std::vector<double> median_latent(std::span<const double> alpha1, std::span<const double> alpha2,
                                         double lambda1) {
    const double logit_half = std::log(0.5) - std::log(0.5 + kUniformGuard);
    std::vector<double> pre(alpha1.size());
    for (std::size_t i = 0; i < pre.size(); ++i)
        pre[i] = detail::stable_sigmoid((std::log(alpha1[i]) - std::log(alpha2[i]) + logit_half) / lambda1) *
                 alpha1[i];
    const double mx = *std::max_element(pre.begin(), pre.end());
    double s = 0.0;
    for (auto& v : pre) {
        v = std::exp(v - mx);
        s += v;
    }
    for (auto& v : pre) v /= s;
    return pre;
}

/// Batch-mean objective MSE(x, x^) + KL(q || p), reparameterized through the BinConcrete latent.
template <typename Rng>
LossTerms loss(const T2PModel& model, std::span<const std::vector<double>> batch, const T2PConfig& config,
               Rng& rng) {
    if (batch.empty()) throw ContractError("loss: empty batch");
    const BinConcreteParams prior(config.prior_location, config.lambda2);
    const KlOptions kl_options{config.mc_samples, config.kl_mode, kUniformGuard};
    DiffArray total;
    LossTerms out;
    for (const auto& window : batch) {
        const DiffArray x = DiffArray::constant(window);
        const auto enc = model.encode(x);
        const LatentSample s = sample(enc.alpha1, enc.alpha2, config.lambda1, rng);
        const DiffArray recon = mse(model.decode(s.z), x);
        const DiffArray kl = mc_kl(div(enc.alpha1, enc.alpha2), config.lambda1, prior, kl_options, rng);
        out.latent_means.push_back(median_latent(enc.alpha1.values(), enc.alpha2.values(), config.lambda1));
        out.mse += recon.item();
        out.kl += kl.item();
        const DiffArray term = add(recon, kl);
        total = total.defined() ? add(total, term) : term;
    }
    const double n = static_cast<double>(batch.size());
    out.total = mul_scalar(total, 1.0 / n);
    out.mse /= n;
    out.kl /= n;
    return out;
}

inline std::vector<double> T2PModel::latent_mean(std::span<const double> x) const {
    const Encoding e = encode(x);
    return median_latent(e.alpha1.values(), e.alpha2.values(), config_.lambda1);
}

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;
    double mse = 0.0;
    double kl = 0.0;
    double sparsity = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    T2PModel model;
    TrainTrace trace;
};

/// Latent means of every window, row-major [n x k].
inline std::vector<double> latent_matrix(const T2PModel& model, std::span<const std::vector<double>> windows) {
    std::vector<double> out;
    out.reserve(windows.size() * model.n_patterns());
    for (const auto& w : windows) {
        const auto z = model.latent_mean(w);
        out.insert(out.end(), z.begin(), z.end());
    }
    return out;
}

inline double latent_sparsity(const T2PModel& model, std::span<const std::vector<double>> windows) {
    if (windows.size() < 2 || model.n_patterns() < 2) return 0.0;
    return hoyer_sparsity(latent_matrix(model, windows), windows.size(), model.n_patterns());
}

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Adam over shuffled mini-batches for config.epochs epochs. Deterministic for a fixed seed.
inline TrainResult train(std::span<const std::vector<double>> windows, const T2PConfig& config,
                         const EpochObserver& observer = {}) {
    config.validate();
    if (windows.empty()) throw InputError("train: no windows");
    for (const auto& w : windows)
        if (w.size() != config.pattern_length)
            throw DimensionError("train: window length " + std::to_string(w.size()) + " != pattern length " +
                                 std::to_string(config.pattern_length));

    TrainResult result{T2PModel(config), {}};
    auto& params = result.model.parameters();
    AdamState adam(params, AdamOptions{config.learning_rate});
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::vector<double>> batch;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0, mse_sum = 0.0, kl_sum = 0.0;
        std::vector<double> latents(windows.size() * config.n_patterns);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(windows[order[i]]);
            zero_grad(params);
            const LossTerms terms = loss(result.model, batch, config, rng);
            const double batch_loss = terms.total.item();
            if (!std::isfinite(batch_loss))
                throw NumericalError("training diverged at epoch " + std::to_string(epoch) + " (learning rate " +
                                     format_double(config.learning_rate) + "): non-finite loss");
            backward(terms.total);
            adam_step(params, adam);
            for (std::size_t i = start; i < stop; ++i)
                std::copy(terms.latent_means[i - start].begin(), terms.latent_means[i - start].end(),
                          latents.begin() + static_cast<std::ptrdiff_t>(order[i] * config.n_patterns));
            const double n = static_cast<double>(stop - start);
            loss_sum += batch_loss * n;
            mse_sum += terms.mse * n;
            kl_sum += terms.kl * n;
        }
        const double n = static_cast<double>(windows.size());
        const double sparsity = windows.size() >= 2 && config.n_patterns >= 2
                                    ? hoyer_sparsity(latents, windows.size(), config.n_patterns)
                                    : 0.0;
        EpochRecord rec{epoch, loss_sum / n, mse_sum / n, kl_sum / n, sparsity};
        result.trace.epochs.push_back(rec);
        if (observer) observer(rec);
    }
    return result;
}

inline PatternSet extract_patterns(const T2PModel& model) {
    PatternSet ps;
    ps.pattern_length = model.pattern_length();
    const auto v = model.kernels().values();
    for (std::size_t i = 0; i < model.n_patterns(); ++i) {
        const auto begin = v.begin() + static_cast<std::ptrdiff_t>(i * ps.pattern_length);
        ps.patterns.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(ps.pattern_length));
    }
    return ps;
}

struct PatternChoice {
    std::size_t pattern_id = 0;
    double score = 0.0;
};

/// argmax z with ties to the lowest index; score = max z.
inline PatternChoice choose_pattern(std::span<const double> z) {
    if (z.empty()) throw DimensionError("choose_pattern: empty latent");
    PatternChoice c{0, z[0]};
    for (std::size_t i = 1; i < z.size(); ++i)
        if (z[i] > c.score) c = {i, z[i]};
    return c;
}

inline PatternChoice assign(const T2PModel& model, std::span<const double> window) {
    if (window.size() != model.pattern_length())
        throw DimensionError("assign: window length " + std::to_string(window.size()) + " != pattern length " +
                             std::to_string(model.pattern_length()));
    return choose_pattern(model.latent_mean(window));
}

inline double window_mse(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

/// Assigns every non-overlapping window of the series to a learned pattern.
inline Summary summarize(const T2PModel& model, const TimeSeries& series) {
    const std::size_t m = model.pattern_length();
    if (series.size() < m)
        throw InputError("series of length " + std::to_string(series.size()) + " is shorter than pattern length " +
                         std::to_string(m));
    const Segmentation seg = segment(series, m);
    const PatternSet patterns = extract_patterns(model);
    Summary s;
    s.series_length = series.size();
    s.window_length = m;
    s.n_patterns = model.n_patterns();
    s.remainder = seg.remainder;
    for (std::size_t w = 0; w < seg.windows.size(); ++w) {
        const PatternChoice c = assign(model, seg.windows[w]);
        s.windows.push_back({w, w * m, c.pattern_id, c.score, window_mse(seg.windows[w], patterns.patterns[c.pattern_id])});
    }
    return s;
}

}  // namespace t2p
