#pragma once

#include "errors.hpp"
#include "propagation.hpp"
#include "detail/compensated_sum.hpp"
#include "detail/parallel.hpp"
#include "detail/rng.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/sin_pi.hpp>
#include <boost/random/exponential_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace macgeo {

/// Inputs of the success-probability series.  gamma = 2/alpha.
struct SeriesParams {
    double lambda = 1.0;
    double beta = 10.0;
    double alpha = 4.0;
    std::size_t max_terms = 2000;
    double rel_tol = 1e-16;

    [[nodiscard]] double gamma() const { return 2.0 / alpha; }

    /// pi psi(gamma) Gamma(1 - gamma); psi = 1 without fading.
    [[nodiscard]] double C(const Fading& fading = {}) const
    {
        return std::numbers::pi * psi(fading, gamma()) * std::tgamma(1.0 - gamma());
    }

    void validate() const
    {
        detail::require(std::isfinite(lambda) && lambda >= 0.0, "density lambda must be non-negative");
        detail::require(std::isfinite(beta) && beta > 0.0, "SIR threshold beta must be positive");
        detail::require(std::isfinite(alpha) && alpha > 2.0, "attenuation alpha must exceed 2");
        detail::require(max_terms >= 1, "max_terms must be positive");
        detail::require(rel_tol > 0.0, "rel_tol must be positive");
    }
};

enum class Method { series, integral, monte_carlo, closed_form };

inline std::string_view to_string(Method m)
{
    switch (m) {
    case Method::series: return "series";
    case Method::integral: return "integral";
    case Method::monte_carlo: return "monte_carlo";
    case Method::closed_form: return "closed_form";
    }
    return "?";
}

struct AlohaResult {
    double r = 0.0;
    double p = 0.0;
    double rp = 0.0;
    double inv_rp = std::numeric_limits<double>::infinity();
    Method method = Method::series;

    static AlohaResult make(double r, double p, Method m)
    {
        AlohaResult out{r, p, r * p, std::numeric_limits<double>::infinity(), m};
        if (out.rp > 0.0)
            out.inv_rp = 1.0 / out.rp;
        return out;
    }
};

/// Largest term over the final sum beyond which the series result is rejected.
inline constexpr double series_condition_limit = 1e12;

/// Estimated accumulated rounding error over the sum beyond which the series
/// result is rejected.
inline constexpr double series_rounding_limit = 1e-6;

namespace detail {

/// log E[F^s] for fading models with all moments finite.
inline double log_psi(const Fading& fading, double s)
{
    switch (fading.kind) {
    case FadingKind::none: return 0.0;
    case FadingKind::log_uniform: {
        const double z = std::abs(fading.spread * s);
        if (z < 1e-4)
            return z * z / 6.0;
        if (z < 20.0)
            return std::log(std::sinh(z) / z);
        return z + std::log1p(-std::exp(-2.0 * z)) - std::log(2.0 * z);
    }
    case FadingKind::exponential: return std::lgamma(1.0 + s);
    }
    return 0.0;
}

} // namespace detail

/// Pr(W < x F) for Poisson interference of density lambda, F the fading of
/// the desired link (F = 1 without fading):
///
///   sum_n (-C lambda)^n / n! * sin(pi n gamma)/pi * Gamma(n gamma) * x^(-n gamma) * psi(-n gamma)
///
/// with the n = 0 term equal to 1.  Terms are built from logarithms.  Throws
/// precision_loss_error when the largest term exceeds 1e12 times the sum, or
/// when the estimated rounding error exceeds 1e-6 of it.
inline double prob_w_below(double x, const SeriesParams& params, const Fading& fading = {})
{
    params.validate();
    fading.validate();
    detail::require(x > 0.0, "signal level x must be positive");
    if (fading.kind == FadingKind::exponential)
        throw unsupported_model_error("series needs E[F^-s] for all s; exponential fading has poles");
    if (params.lambda == 0.0 || std::isinf(x))
        return 1.0;

    const double g = params.gamma();
    const double log_a = std::log(params.C(fading) * params.lambda) - g * std::log(x);
    detail::CompensatedSum acc;
    acc.add(1.0);
    double largest = 1.0;
    double rounding = 0.0;
    double prev_env = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (std::size_t n = 1; n <= params.max_terms; ++n) {
        const double ng = static_cast<double>(n) * g;
        // |term| without the sine factor, so exact zeros of sin do not stop the loop early.
        const double log_env = static_cast<double>(n) * log_a - std::lgamma(static_cast<double>(n) + 1.0) +
                               std::lgamma(ng) - std::log(std::numbers::pi) + detail::log_psi(fading, -ng);
        const double env = std::exp(log_env);
        if (!std::isfinite(env))
            throw precision_loss_error("series terms overflow");
        const double sn = boost::math::sin_pi(ng);
        const double term = ((n % 2) ? -1.0 : 1.0) * sn * env;
        acc.add(term);
        largest = std::max(largest, env);
        // exp() of a log-magnitude L carries relative error of order L * eps.
        rounding += env * std::numeric_limits<double>::epsilon() * (std::abs(log_env) + 8.0);
        // The partial sum is meaningless while terms still cancel, so the stop
        // rule also requires decay well below the peak term.
        const double bound = params.rel_tol * std::min(std::abs(acc.value()), largest);
        if (env == 0.0 || (env < prev_env && env < bound)) {
            converged = true;
            break;
        }
        prev_env = env;
    }
    const double sum = acc.value();
    if (!converged)
        throw precision_loss_error("series did not converge within max_terms");
    if (largest > series_condition_limit * std::abs(sum))
        throw precision_loss_error("series lost precision to cancellation");
    if (rounding > series_rounding_limit * std::abs(sum))
        throw precision_loss_error("series rounding error too large relative to the sum");
    return std::clamp(sum, 0.0, 1.0);
}

namespace detail {

/// CDF of the standard positive stable law E[e^-tY] = e^(-t^g), 0 < g < 1,
/// from Zolotarev's integral representation.
inline double stable_cdf(double y, double g)
{
    if (y <= 0.0)
        return 0.0;
    if (std::isinf(y))
        return 1.0;
    const double e = g / (1.0 - g);
    const double scale = std::pow(y, -e);
    const double inv = 1.0 / (1.0 - g);
    auto integrand = [&](double phi) {
        if (phi <= 0.0)
            phi = 1e-300;
        if (phi >= std::numbers::pi)
            return 0.0;
        const double sg = std::sin(g * phi);
        const double a = std::pow(sg / std::sin(phi), inv) * std::sin((1.0 - g) * phi) / sg;
        return std::exp(-scale * a);
    };
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                         integrand, 0.0, std::numbers::pi, 15, 1e-13, &err) /
                     std::numbers::pi;
    return std::clamp(v, 0.0, 1.0);
}

} // namespace detail

/// Pr(W < x F) by quadrature instead of the series: W = (C lambda)^(1/gamma) Y
/// with Y standard positive stable, averaged over the desired-link fading.
inline double prob_w_below_integral(double x, const SeriesParams& params, const Fading& fading = {})
{
    params.validate();
    fading.validate();
    detail::require(x > 0.0, "signal level x must be positive");
    if (params.lambda == 0.0 || std::isinf(x))
        return 1.0;
    const double g = params.gamma();
    const double scale = std::pow(params.C(fading) * params.lambda, 1.0 / g);
    switch (fading.kind) {
    case FadingKind::none: return detail::stable_cdf(x / scale, g);
    case FadingKind::log_uniform: {
        const double f = fading.spread;
        auto inner = [&](double u) { return detail::stable_cdf(x * std::exp(u) / scale, g); };
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inner, -f, f, 10, 1e-12);
        return std::clamp(v / (2.0 * f), 0.0, 1.0);
    }
    case FadingKind::exponential: {
        auto inner = [&](double t) {
            // F = -log(v) over v in (0, 1) keeps the range finite.
            const double F = -std::log(t);
            return detail::stable_cdf(x * F / scale, g);
        };
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(inner, 0.0, 1.0, 12, 1e-12);
        return std::clamp(v, 0.0, 1.0);
    }
    }
    return 0.0;
}

/// Success probability of a slotted-ALOHA link of length r: Pr(W < r^-alpha F / beta).
/// Series only; see aloha_success for the routed version.
inline double aloha_prob(double r, const SeriesParams& params, const Fading& fading = {})
{
    detail::require(std::isfinite(r) && r > 0.0, "range r must be positive");
    return prob_w_below(std::pow(r, -params.alpha) / params.beta, params, fading);
}

/// exp(-lambda pi Gamma(1 - gamma) Gamma(1 + gamma) beta^gamma r^2): exponential
/// fading on every link.
inline double aloha_prob_exponential(double r, const SeriesParams& params)
{
    params.validate();
    detail::require(std::isfinite(r) && r > 0.0, "range r must be positive");
    const double g = params.gamma();
    return std::exp(-params.lambda * std::numbers::pi * std::tgamma(1.0 - g) * std::tgamma(1.0 + g) *
                    std::pow(params.beta, g) * r * r);
}

/// Success probability by the best available analytic route: closed form for
/// exponential fading, otherwise the series, falling back to quadrature when
/// the series reports precision loss.
inline AlohaResult aloha_success(double r, const SeriesParams& params, const Fading& fading = {})
{
    detail::require(std::isfinite(r) && r > 0.0, "range r must be positive");
    if (fading.kind == FadingKind::exponential)
        return AlohaResult::make(r, aloha_prob_exponential(r, params), Method::closed_form);
    const double x = std::pow(r, -params.alpha) / params.beta;
    try {
        return AlohaResult::make(r, prob_w_below(x, params, fading), Method::series);
    } catch (const precision_loss_error&) {
        return AlohaResult::make(r, prob_w_below_integral(x, params, fading), Method::integral);
    }
}

/// E[exp(-theta W)] = exp(-pi lambda Gamma(1 - gamma) psi(gamma) theta^gamma).
inline double laplace_transform_w(double theta, double lambda, double alpha, const Fading& fading = {})
{
    detail::require(std::isfinite(theta) && theta >= 0.0, "theta must be non-negative");
    detail::require(lambda >= 0.0, "density must be non-negative");
    detail::require(alpha > 2.0, "attenuation alpha must exceed 2");
    if (theta == 0.0)
        return 1.0;
    const double g = 2.0 / alpha;
    return std::exp(-std::numbers::pi * lambda * std::tgamma(1.0 - g) * psi(fading, g) * std::pow(theta, g));
}

/// Monte Carlo over Poisson interferer fields seen from a receiver.
///
/// Each trial draws the interferers in a disk of radius R around the
/// receiver (by stationarity only their distances matter), adds the mean of
/// the field beyond R, and draws fading on every link.  Distances and fading
/// draws do not depend on alpha, r or beta, so one trial serves every cell of
/// the (alpha, fading, r, beta) grid.
struct McBatchConfig {
    double lambda = 1.0;
    std::vector<double> alphas{4.0};
    std::vector<double> ranges;
    std::vector<double> betas;
    std::vector<Fading> fadings{Fading::none()};
    std::size_t trials = 1'000'000;
    std::uint64_t seed = 1;
    /// 0 selects max(50 r_max, 50 / sqrt(lambda)).
    double radius = 0.0;
    unsigned threads = 0;

    void validate() const
    {
        detail::require(std::isfinite(lambda) && lambda > 0.0, "density lambda must be positive");
        detail::require(!alphas.empty() && !ranges.empty() && !betas.empty() && !fadings.empty(),
                        "empty Monte Carlo grid");
        for (double a : alphas)
            detail::require(std::isfinite(a) && a > 2.0, "attenuation alpha must exceed 2");
        for (double r : ranges)
            detail::require(std::isfinite(r) && r > 0.0, "ranges must be positive");
        for (double b : betas)
            detail::require(std::isfinite(b) && b >= 0.0, "thresholds must be non-negative");
        for (const auto& f : fadings)
            f.validate();
        detail::require(trials >= 1000, "at least 1000 trials required");
        detail::require(std::isfinite(radius) && radius >= 0.0, "radius must be non-negative");
    }

    [[nodiscard]] double effective_radius() const
    {
        if (radius > 0.0)
            return radius;
        const double rmax = *std::max_element(ranges.begin(), ranges.end());
        return std::max(50.0 * rmax, 50.0 / std::sqrt(lambda));
    }
};

struct McGrid {
    std::size_t n_alpha = 0, n_fading = 0, n_range = 0, n_beta = 0;
    std::vector<McEstimate> cells;

    [[nodiscard]] const McEstimate& at(std::size_t a, std::size_t f, std::size_t r, std::size_t b) const
    {
        return cells[((a * n_fading + f) * n_range + r) * n_beta + b];
    }
};

namespace detail {

inline constexpr std::size_t mc_chunk = 4096;

/// sum_j inv_j^(N + H/2) * F_j with the exponent fixed at compile time.
template <int N, bool H>
double weighted_power_sum(const double* inv, const double* sq, const double* F, std::size_t n)
{
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double g = inv[j];
        for (int k = 1; k < N; ++k)
            g *= inv[j];
        if constexpr (H)
            g *= sq[j];
        acc += F ? g * F[j] : g;
    }
    return acc;
}

inline double power_sum(double alpha, const double* inv, const double* sq, const double* F, std::size_t n)
{
    const double twice = 2.0 * alpha;
    if (alpha == std::floor(alpha) && alpha >= 3.0 && alpha <= 10.0 && twice == std::floor(twice)) {
        switch (static_cast<int>(alpha)) {
        case 3: return weighted_power_sum<1, true>(inv, sq, F, n);
        case 4: return weighted_power_sum<2, false>(inv, sq, F, n);
        case 5: return weighted_power_sum<2, true>(inv, sq, F, n);
        case 6: return weighted_power_sum<3, false>(inv, sq, F, n);
        case 7: return weighted_power_sum<3, true>(inv, sq, F, n);
        case 8: return weighted_power_sum<4, false>(inv, sq, F, n);
        case 9: return weighted_power_sum<4, true>(inv, sq, F, n);
        case 10: return weighted_power_sum<5, false>(inv, sq, F, n);
        default: break;
        }
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        acc += std::pow(inv[j], alpha / 2.0) * (F ? F[j] : 1.0);
    return acc;
}

inline void mc_chunk_run(const McBatchConfig& cfg, double R, std::size_t chunk, std::size_t n_trials,
                         std::vector<std::size_t>& counts)
{
    auto eng = make_engine(cfg.seed, chunk);
    boost::random::exponential_distribution<double> expo;
    const double R2 = R * R;
    std::poisson_distribution<long long> count_dist(cfg.lambda * std::numbers::pi * R2);
    const std::size_t na = cfg.alphas.size();
    const std::size_t nf = cfg.fadings.size();
    const std::size_t nr = cfg.ranges.size();
    const std::size_t nb = cfg.betas.size();

    std::vector<double> tail(na * nf), signal_gain(na * nr);
    for (std::size_t a = 0; a < na; ++a) {
        const double alpha = cfg.alphas[a];
        const double t = 2.0 * std::numbers::pi * cfg.lambda * std::pow(R, 2.0 - alpha) / (alpha - 2.0);
        for (std::size_t f = 0; f < nf; ++f)
            tail[a * nf + f] = t * psi(cfg.fadings[f], 1.0);
        for (std::size_t k = 0; k < nr; ++k)
            signal_gain[a * nr + k] = std::pow(cfg.ranges[k], -alpha);
    }
    std::vector<LogUniformSampler> log_uniform;
    for (const auto& fad : cfg.fadings)
        log_uniform.emplace_back(fad.kind == FadingKind::log_uniform ? fad.spread : 1.0);
    auto draw = [&](std::size_t f) {
        switch (cfg.fadings[f].kind) {
        case FadingKind::none: return 1.0;
        case FadingKind::log_uniform: return log_uniform[f](eng);
        case FadingKind::exponential: return expo(eng);
        }
        return 1.0;
    };

    std::vector<double> inv, sq, W(na * nf), F(nf);
    std::vector<std::vector<double>> fade(nf);
    for (std::size_t t = 0; t < n_trials; ++t) {
        const auto n = static_cast<std::size_t>(count_dist(eng));
        inv.resize(n);
        sq.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            inv[j] = 1.0 / (R2 * uniform01(eng));
        for (std::size_t j = 0; j < n; ++j)
            sq[j] = std::sqrt(inv[j]);
        for (std::size_t f = 0; f < nf; ++f) {
            if (cfg.fadings[f].kind == FadingKind::none)
                continue;
            fade[f].resize(n);
            for (auto& v : fade[f])
                v = draw(f);
        }
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t f = 0; f < nf; ++f)
                W[a * nf + f] = tail[a * nf + f] +
                                power_sum(cfg.alphas[a], inv.data(), sq.data(),
                                          cfg.fadings[f].kind == FadingKind::none ? nullptr : fade[f].data(), n);
        for (std::size_t f = 0; f < nf; ++f)
            F[f] = draw(f);
        for (std::size_t a = 0; a < na; ++a) {
            for (std::size_t f = 0; f < nf; ++f) {
                const double w = W[a * nf + f];
                for (std::size_t k = 0; k < nr; ++k) {
                    const double sig = F[f] * signal_gain[a * nr + k];
                    std::size_t* c = &counts[((a * nf + f) * nr + k) * nb];
                    for (std::size_t b = 0; b < nb; ++b)
                        c[b] += sig >= cfg.betas[b] * w;
                }
            }
        }
    }
}

} // namespace detail

inline McGrid mc_aloha_batch(const McBatchConfig& cfg)
{
    cfg.validate();
    const double R = cfg.effective_radius();
    McGrid out{cfg.alphas.size(), cfg.fadings.size(), cfg.ranges.size(), cfg.betas.size(), {}};
    const std::size_t cells = out.n_alpha * out.n_fading * out.n_range * out.n_beta;
    const std::size_t n_chunks = (cfg.trials + detail::mc_chunk - 1) / detail::mc_chunk;

    const unsigned threads = detail::worker_count(cfg.threads, n_chunks);
    std::vector<std::vector<std::size_t>> partial(threads, std::vector<std::size_t>(cells, 0));
    detail::for_each_chunk(n_chunks, threads, [&](unsigned w, std::size_t c) {
        const std::size_t n = std::min(detail::mc_chunk, cfg.trials - c * detail::mc_chunk);
        detail::mc_chunk_run(cfg, R, c, n, partial[w]);
    });

    const double n = static_cast<double>(cfg.trials);
    out.cells.resize(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        std::size_t s = 0;
        for (const auto& part : partial)
            s += part[c];
        out.cells[c] = McEstimate::from_counts(s, cfg.trials);
    }
    return out;
}

/// Single-cell Monte Carlo estimate; the standard error is the binomial one.
inline McEstimate mc_aloha_prob(double r, double lambda, const ChannelModel& model, std::size_t trials,
                                std::uint64_t seed, double radius = 0.0)
{
    McBatchConfig cfg;
    cfg.lambda = lambda;
    cfg.alphas = {model.alpha};
    cfg.ranges = {r};
    cfg.betas = {model.beta};
    cfg.fadings = {model.fading};
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.radius = radius;
    return mc_aloha_batch(cfg).at(0, 0, 0, 0);
}

/// Maximizes r p(r) for an ALOHA link.
///
/// A 64-point log scan brackets the maximum; if the scan is not unimodal a
/// 10^4-point scan is used instead.  Golden-section search then narrows the
/// bracket to 1e-5 / sqrt(lambda).
inline AlohaResult optimize_range(const SeriesParams& params, const Fading& fading = {})
{
    params.validate();
    detail::require(params.lambda > 0.0, "density lambda must be positive");
    auto p_of = [&](double r) { return aloha_success(r, params, fading).p; };
    const double unit = 1.0 / std::sqrt(params.lambda);
    const double r_lo = 1e-4 * unit;
    double r_hi = r_lo;
    while (p_of(r_hi) >= 1e-6) {
        r_hi *= 2.0;
        if (r_hi > 1e6 * unit)
            throw error("success probability does not decay with range");
    }

    auto scan = [&](std::size_t n) {
        std::vector<double> rs(n), fs(n);
        const double q = std::log(r_hi / r_lo) / static_cast<double>(n - 1);
        for (std::size_t k = 0; k < n; ++k) {
            rs[k] = r_lo * std::exp(q * static_cast<double>(k));
            fs[k] = rs[k] * p_of(rs[k]);
        }
        return std::pair{rs, fs};
    };
    auto [rs, fs] = scan(64);
    auto best = static_cast<std::size_t>(std::max_element(fs.begin(), fs.end()) - fs.begin());
    bool unimodal = true;
    for (std::size_t k = 1; k < fs.size(); ++k)
        if ((k <= best && fs[k] < fs[k - 1]) || (k > best && fs[k] > fs[k - 1]))
            unimodal = false;
    if (!unimodal) {
        std::tie(rs, fs) = scan(10'000);
        best = static_cast<std::size_t>(std::max_element(fs.begin(), fs.end()) - fs.begin());
    }
    double a = rs[best == 0 ? 0 : best - 1];
    double b = rs[std::min(best + 1, rs.size() - 1)];

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = c * p_of(c);
    double fd = d * p_of(d);
    const double tol = 1e-5 * unit;
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = c * p_of(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = d * p_of(d);
        }
    }
    return aloha_success(0.5 * (a + b), params, fading);
}

} // namespace macgeo
