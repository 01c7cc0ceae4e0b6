#pragma once

// Binary Concrete (relaxed Bernoulli) distribution.
//
// A BinConcrete(alpha, lambda) variable is x = sigmoid((ln alpha + logit U) / lambda)
// with U ~ Uniform(0, 1). Sampling and densities are written in terms of the
// logit t = (ln alpha + logit U) / lambda so that ln x = -softplus(-t) and
// ln(1 - x) = -softplus(t) stay finite even when x rounds to 0 or 1.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "t2p/errors.hpp"
#include "t2p/tensor.hpp"

namespace t2p {

/// Guard in the denominator of the reparameterization, 1 - U + eps.
inline constexpr double kUniformGuard = 1e-8;

struct BinConcreteParams {
    double location;
    double temperature;

    BinConcreteParams(double loc, double temp) : location(loc), temperature(temp) {
        if (!(loc > 0.0) || !std::isfinite(loc))
            throw DomainError("BinConcrete location must be positive, got " + std::to_string(loc));
        if (!(temp > 0.0 && temp <= 1.0))
            throw DomainError("BinConcrete temperature must lie in (0, 1], got " + std::to_string(temp));
    }
};

enum class KlMode {
    posterior_sampled,  // E_q[log q - log p]; the ELBO regularizer
    uniform_sampled,    // mean of log p - log q at z ~ Uniform(0, 1)
};

/// Uniform draw on the open interval (0, 1) with 53 random bits.
template <typename Rng>
double open_uniform(Rng& rng) {
    const std::uint64_t bits = static_cast<std::uint64_t>(rng()) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

template <typename Rng>
std::vector<double> open_uniform(Rng& rng, std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = open_uniform(rng);
    return out;
}

namespace detail {

inline void require_open_unit(double x, const char* what) {
    if (!(x > 0.0 && x < 1.0))
        throw DomainError(std::string(what) + " must lie in (0, 1), got " + std::to_string(x));
}

// ln f(x; alpha, lambda) from ln x, ln(1 - x) and ln alpha.
inline double log_density(double ln_x, double ln_1mx, double ln_alpha, double lambda) {
    const double a = ln_alpha - lambda * ln_x;
    const double b = -lambda * ln_1mx;
    const double m = std::max(a, b);
    const double lse = m + std::log1p(std::exp(std::min(a, b) - m));
    return std::log(lambda) + ln_alpha - (lambda + 1.0) * (ln_x + ln_1mx) - 2.0 * lse;
}

// Differentiable counterpart; ln_alpha may be a single element that broadcasts.
inline DiffArray log_density(const DiffArray& ln_x, const DiffArray& ln_1mx, const DiffArray& ln_alpha,
                             double lambda) {
    const DiffArray a = sub(ln_alpha, mul_scalar(ln_x, lambda));
    const DiffArray b = mul_scalar(ln_1mx, -lambda);
    const DiffArray body = sub(add_scalar(ln_alpha, std::log(lambda)), mul_scalar(add(ln_x, ln_1mx), lambda + 1.0));
    return sub(body, mul_scalar(logaddexp(a, b), 2.0));
}

}  // namespace detail

/// Density lambda*alpha*x^-(lambda+1)*(1-x)^-(lambda+1) / (alpha*x^-lambda + (1-x)^-lambda)^2,
/// evaluated as lambda*y*(1-y)/(x*(1-x)) with y = sigmoid(ln alpha - lambda*logit(x)).
inline double pdf(double x, const BinConcreteParams& p) {
    detail::require_open_unit(x, "BinConcrete pdf argument");
    const double l = p.temperature;
    const double r = l * (std::log(x) - std::log1p(-x)) - std::log(p.location);
    const double e = std::exp(-std::abs(r));
    const double yy = e / ((1.0 + e) * (1.0 + e));
    return l * (yy / (x * (1.0 - x)));
}

/// Log-density in a form that stays finite near the boundaries.
inline double log_pdf(double x, const BinConcreteParams& p) {
    detail::require_open_unit(x, "BinConcrete log_pdf argument");
    return detail::log_density(std::log(x), std::log1p(-x), std::log(p.location), p.temperature);
}

struct LatentSample {
    DiffArray z;        // softmax((Y / (1 + Y)) * alpha1), sums to one
    DiffArray y;        // raw Y = (alpha U / (1 - U + eps))^(1 / lambda)
    DiffArray relaxed;  // Y / (1 + Y), the BinConcrete variate
    std::vector<double> u;
};

/// Reparameterized draw with alpha = alpha1 / alpha2; differentiable in alpha1 and alpha2.
inline LatentSample sample(const DiffArray& alpha1, const DiffArray& alpha2, double lambda1,
                           std::span<const double> u, double eps = kUniformGuard) {
    if (alpha1.size() != alpha2.size() || alpha1.size() != u.size())
        throw DimensionError("sample: alpha1 (" + std::to_string(alpha1.size()) + "), alpha2 (" +
                             std::to_string(alpha2.size()) + ") and u (" + std::to_string(u.size()) +
                             ") lengths differ");
    if (!(lambda1 > 0.0 && lambda1 <= 1.0))
        throw DomainError("sample: temperature must lie in (0, 1], got " + std::to_string(lambda1));
    std::vector<double> logit_u(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        detail::require_open_unit(u[i], "uniform draw");
        logit_u[i] = std::log(u[i]) - std::log(1.0 - u[i] + eps);
    }
    const DiffArray ln_alpha = sub(log(alpha1), log(alpha2));
    const DiffArray t = mul_scalar(add(ln_alpha, DiffArray::constant(std::move(logit_u))), 1.0 / lambda1);
    LatentSample out;
    out.relaxed = sigmoid(t);
    out.y = exp(t);
    out.z = softmax(mul(out.relaxed, alpha1));
    out.u.assign(u.begin(), u.end());
    return out;
}

template <std::uniform_random_bit_generator Rng>
LatentSample sample(const DiffArray& alpha1, const DiffArray& alpha2, double lambda1, Rng& rng) {
    const auto u = open_uniform(rng, alpha1.size());
    return sample(alpha1, alpha2, lambda1, u);
}

struct KlOptions {
    std::size_t samples = 10;
    KlMode mode = KlMode::posterior_sampled;
    double epsilon = kUniformGuard;
};

/// Monte-Carlo KL estimate between a factorized BinConcrete posterior with
/// per-dimension locations `posterior_location` (temperature `posterior_temperature`)
/// and a shared BinConcrete prior. Summed over dimensions, averaged over samples;
/// differentiable in the posterior locations.
template <typename Rng>
DiffArray mc_kl(const DiffArray& posterior_location, double posterior_temperature, const BinConcreteParams& prior,
                const KlOptions& options, Rng& rng) {
    if (options.samples < 1) throw ContractError("mc_kl: sample count must be at least 1");
    if (!(posterior_temperature > 0.0 && posterior_temperature <= 1.0))
        throw DomainError("mc_kl: posterior temperature must lie in (0, 1]");
    const std::size_t k = posterior_location.size();
    const std::size_t s = options.samples;
    const DiffArray ln_alpha = tile(log(posterior_location), s);
    const DiffArray ln_prior = DiffArray::scalar(std::log(prior.location));

    if (options.mode == KlMode::posterior_sampled) {
        std::vector<double> logit_u(s * k);
        for (auto& v : logit_u) {
            const double u = open_uniform(rng);
            v = std::log(u) - std::log(1.0 - u + options.epsilon);
        }
        const DiffArray t = mul_scalar(add(ln_alpha, DiffArray::constant(std::move(logit_u), Shape{s, k})),
                                       1.0 / posterior_temperature);
        const DiffArray ln_x = neg(softplus(neg(t)));
        const DiffArray ln_1mx = neg(softplus(t));
        const DiffArray lq = detail::log_density(ln_x, ln_1mx, ln_alpha, posterior_temperature);
        const DiffArray lp = detail::log_density(ln_x, ln_1mx, ln_prior, prior.temperature);
        return mul_scalar(sum(sub(lq, lp)), 1.0 / static_cast<double>(s));
    }

    std::vector<double> ln_x(s * k), ln_1mx(s * k);
    for (std::size_t i = 0; i < s * k; ++i) {
        const double x = open_uniform(rng);
        ln_x[i] = std::log(x);
        ln_1mx[i] = std::log1p(-x);
    }
    const DiffArray lx = DiffArray::constant(std::move(ln_x), Shape{s, k});
    const DiffArray l1mx = DiffArray::constant(std::move(ln_1mx), Shape{s, k});
    const DiffArray lq = detail::log_density(lx, l1mx, ln_alpha, posterior_temperature);
    const DiffArray lp = detail::log_density(lx, l1mx, ln_prior, prior.temperature);
    return mul_scalar(sum(sub(lp, lq)), 1.0 / static_cast<double>(s));
}

/// Scalar convenience form for a single latent dimension.
template <typename Rng>
double mc_kl(const BinConcreteParams& posterior, const BinConcreteParams& prior, const KlOptions& options,
             Rng& rng) {
    return mc_kl(DiffArray::scalar(posterior.location), posterior.temperature, prior, options, rng).item();
}

}  // namespace t2p
