#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "spatial.hpp"
#include "detail/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace macgeo {

enum class FadingKind { none, log_uniform, exponential };

/// Power fading F on a link.  log_uniform draws F = e^u with u ~ U[-spread, spread];
/// exponential is mean-one (Rayleigh amplitude).
struct Fading {
    FadingKind kind = FadingKind::none;
    double spread = 0.0;

    static constexpr Fading none() { return {}; }
    static constexpr Fading log_uniform(double f) { return {FadingKind::log_uniform, f}; }
    static constexpr Fading exponential() { return {FadingKind::exponential, 0.0}; }

    void validate() const
    {
        if (kind == FadingKind::log_uniform)
            detail::require(std::isfinite(spread) && spread > 0.0, "log-uniform spread must be positive");
    }

    friend bool operator==(const Fading&, const Fading&) = default;
};

inline std::string to_string(const Fading& f)
{
    switch (f.kind) {
    case FadingKind::none: return "none";
    case FadingKind::exponential: return "exponential";
    case FadingKind::log_uniform: {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, f.spread);
        return "log-uniform:" + std::string(buf, res.ptr);
    }
    }
    return "?";
}

/// Parses `none`, `exponential` or `log-uniform:<f>`.
inline Fading parse_fading(std::string_view text)
{
    if (text == "none")
        return Fading::none();
    if (text == "exponential" || text == "rayleigh")
        return Fading::exponential();
    constexpr std::string_view prefix = "log-uniform:";
    if (text.starts_with(prefix)) {
        const auto num = text.substr(prefix.size());
        double f = 0.0;
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), f);
        if (ec != std::errc{} || ptr != num.data() + num.size())
            throw invalid_argument_error("bad log-uniform spread '" + std::string(num) + "'");
        Fading out = Fading::log_uniform(f);
        out.validate();
        return out;
    }
    throw invalid_argument_error("unknown fading model '" + std::string(text) + "'");
}

/// Attenuation, SIR threshold and fading.  Noise is 0 and every transmitter
/// sends at unit power.
struct ChannelModel {
    double alpha = 4.0;
    double beta = 10.0;
    Fading fading{};

    [[nodiscard]] double gamma() const { return 2.0 / alpha; }

    void validate() const
    {
        detail::require(std::isfinite(alpha) && alpha > 2.0, "attenuation alpha must exceed 2");
        detail::require(std::isfinite(beta) && beta > 0.0, "SIR threshold beta must be positive");
        fading.validate();
    }
};

inline constexpr std::size_t no_exclusion = std::numeric_limits<std::size_t>::max();

/// Distances below this fraction of the mean spacing 1/sqrt(lambda) count as
/// landing on a transmitter.
inline constexpr double singular_fraction = 1e-9;

namespace detail {

/// r2^(-alpha/2), with repeated multiplication when alpha is an integer.
class NegPow {
public:
    explicit NegPow(double alpha) : half_(alpha / 2.0)
    {
        if (alpha == std::floor(alpha) && alpha <= 256.0) {
            const auto a = static_cast<int>(alpha);
            n_ = a / 2;
            half_int_ = (a % 2) != 0;
            mode_ = fast;
        }
    }

    double operator()(double r2) const
    {
        if (mode_ == general)
            return std::pow(r2, -half_);
        double acc = ipow(r2, n_);
        if (half_int_)
            acc *= std::sqrt(r2);
        return 1.0 / acc;
    }

    /// Same value from inv = 1/r2 and its square root, for callers that
    /// evaluate several exponents at one distance.
    [[nodiscard]] double from_inverse(double inv, double sqrt_inv) const
    {
        if (mode_ == general)
            return std::pow(inv, half_);
        double acc = ipow(inv, n_);
        if (half_int_)
            acc *= sqrt_inv;
        return acc;
    }

    [[nodiscard]] bool needs_sqrt() const { return mode_ == general || half_int_; }

private:
    static double ipow(double b, int e)
    {
        double r = 1.0;
        while (e > 0) {
            if (e & 1)
                r *= b;
            b *= b;
            e >>= 1;
        }
        return r;
    }

    enum Mode { general, fast };
    double half_;
    int n_ = 0;
    bool half_int_ = false;
    Mode mode_ = general;
};

inline double singular_radius(const PointSet& S)
{
    return singular_fraction / std::sqrt(S.density());
}

} // namespace detail

/// Received power |rx - tx|^(-alpha) at unit transmit power, no fading.
inline double gain(Point2 tx, Point2 rx, double alpha)
{
    const double r = distance(tx, rx);
    if (!(r > 0.0))
        throw singularity_error("receiver coincides with transmitter");
    return std::pow(r, -alpha);
}

/// Sum of gains at rx from every point of S except `exclude`.
///
/// Points farther than `truncation_radius` are dropped (convergence studies only).
inline double interference(Point2 rx, const PointSet& S, std::size_t exclude, double alpha,
                           double truncation_radius = std::numeric_limits<double>::infinity())
{
    detail::require(alpha > 0.0, "alpha must be positive");
    const detail::NegPow negpow(alpha);
    const double rs = detail::singular_radius(S);
    const double rs2 = rs * rs;
    const double tr2 = truncation_radius * truncation_radius;
    const auto xs = S.xs();
    const auto ys = S.ys();
    double w = 0.0;
    for (std::size_t j = 0; j < S.size(); ++j) {
        if (j == exclude)
            continue;
        const double dx = rx.x - xs[j];
        const double dy = rx.y - ys[j];
        const double r2 = dx * dx + dy * dy;
        if (r2 < rs2)
            throw singularity_error("receiver coincides with an interferer");
        if (r2 > tr2)
            continue;
        w += negpow(r2);
    }
    return w;
}

/// Signal-to-interference ratio of transmitter i at rx.
inline double sir(std::size_t i, Point2 rx, const PointSet& S, double alpha)
{
    detail::require(i < S.size(), "transmitter index out of range");
    if (S.size() < 2)
        throw infinite_sir_error("no interferers: SIR is infinite");
    const double r = distance(S[i], rx);
    if (r < detail::singular_radius(S))
        throw singularity_error("receiver coincides with the transmitter");
    const double w = interference(rx, S, i, alpha);
    const double log_s = -alpha * std::log(r) - std::log(w);
    return std::exp(log_s);
}

/// Value and gradient of SIR_i around a fixed transmitter.
///
/// Holds the interferer offsets relative to z_i in units of 1/sqrt(lambda), so
/// large alpha does not under- or overflow at realistic distances.  Points are
/// given relative to z_i as well.
class SirField {
public:
    struct Sample {
        double log_sir = 0.0;
        Vector2 grad_log{}; ///< gradient of log SIR
        [[nodiscard]] double sir() const { return std::exp(log_sir); }
        [[nodiscard]] Vector2 grad() const { return sir() * grad_log; }
    };

    SirField(std::size_t i, const PointSet& S, double alpha,
             double truncation_radius = std::numeric_limits<double>::infinity())
        : alpha_(alpha), negpow_(alpha)
    {
        detail::require(std::isfinite(alpha) && alpha > 2.0, "attenuation alpha must exceed 2");
        detail::require(i < S.size(), "transmitter index out of range");
        if (S.size() < 2)
            throw infinite_sir_error("no interferers: SIR is infinite");
        origin_ = S[i];
        unit_ = 1.0 / std::sqrt(S.density());
        const double inv = 1.0 / unit_;
        const double tr = truncation_radius * inv;
        const double tr2 = tr * tr;
        xs_.reserve(S.size() - 1);
        ys_.reserve(S.size() - 1);
        for (std::size_t j = 0; j < S.size(); ++j) {
            if (j == i)
                continue;
            const double x = (S.xs()[j] - origin_.x) * inv;
            const double y = (S.ys()[j] - origin_.y) * inv;
            if (x * x + y * y > tr2)
                continue;
            xs_.push_back(x);
            ys_.push_back(y);
        }
        if (xs_.empty())
            throw infinite_sir_error("no interferers inside the truncation radius");
    }

    [[nodiscard]] Point2 origin() const { return origin_; }
    [[nodiscard]] double unit() const { return unit_; }
    [[nodiscard]] double alpha() const { return alpha_; }

    /// SIR only (cheaper than sample()).
    [[nodiscard]] double log_sir(Point2 z) const
    {
        const double u = (z.x - origin_.x) / unit_;
        const double v = (z.y - origin_.y) / unit_;
        const double ri2 = u * u + v * v;
        check_singular(ri2);
        double w = 0.0;
        const std::size_t n = xs_.size();
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = u - xs_[j];
            const double dy = v - ys_[j];
            const double r2 = dx * dx + dy * dy;
            check_singular(r2);
            w += negpow_(r2);
        }
        return -0.5 * alpha_ * std::log(ri2) - std::log(w);
    }

    [[nodiscard]] Sample sample(Point2 z) const
    {
        const double u = (z.x - origin_.x) / unit_;
        const double v = (z.y - origin_.y) / unit_;
        const double ri2 = u * u + v * v;
        check_singular(ri2);
        double w = 0.0, sx = 0.0, sy = 0.0;
        const std::size_t n = xs_.size();
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = u - xs_[j];
            const double dy = v - ys_[j];
            const double r2 = dx * dx + dy * dy;
            check_singular(r2);
            const double g = negpow_(r2);
            const double t = g / r2;
            w += g;
            sx += t * dx;
            sy += t * dy;
        }
        Sample out;
        out.log_sir = -0.5 * alpha_ * std::log(ri2) - std::log(w);
        // d log S = -alpha (z - z_i)/r_i^2 + alpha * sum g_j (z - z_j)/r_j^2 / W, then undo the scaling.
        out.grad_log = Vector2{-alpha_ * u / ri2 + alpha_ * sx / w, -alpha_ * v / ri2 + alpha_ * sy / w} / unit_;
        return out;
    }

private:
    static void check_singular(double r2)
    {
        constexpr double lim = singular_fraction * singular_fraction;
        if (r2 < lim)
            throw singularity_error("evaluation point coincides with a transmitter");
    }

    Point2 origin_{};
    double unit_ = 1.0;
    double alpha_;
    detail::NegPow negpow_;
    std::vector<double> xs_;
    std::vector<double> ys_;
};

/// Analytic gradient of SIR_i at rx.
inline Vector2 sir_gradient(std::size_t i, Point2 rx, const PointSet& S, double alpha)
{
    return SirField(i, S, alpha).sample(rx).grad();
}

/// psi(s) = E[F^s].
inline double psi(const Fading& fading, double s)
{
    fading.validate();
    switch (fading.kind) {
    case FadingKind::none: return 1.0;
    case FadingKind::log_uniform: {
        const double x = fading.spread * s;
        if (std::abs(x) < 1e-8)
            return 1.0 + x * x / 6.0;
        return std::sinh(x) / x;
    }
    case FadingKind::exponential:
        if (s <= -1.0)
            throw divergence_error("E[F^s] diverges for exponential fading when s <= -1");
        return std::tgamma(1.0 + s);
    }
    return 1.0;
}

/// One draw of the power fading factor.
inline double sample_fading(const Fading& fading, detail::Engine& eng)
{
    switch (fading.kind) {
    case FadingKind::none: return 1.0;
    case FadingKind::log_uniform: return std::exp(detail::uniform(eng, -fading.spread, fading.spread));
    case FadingKind::exponential: return detail::exponential01(eng);
    }
    return 1.0;
}

/// Draw number `index` of the fading stream rooted at `seed`.
inline double sample_fading(const Fading& fading, std::uint64_t seed, std::uint64_t index = 0)
{
    fading.validate();
    auto eng = detail::make_engine(seed, index);
    return sample_fading(fading, eng);
}

enum class FieldQuantity { interference, sir };

/// Bernoulli Monte Carlo estimate with its binomial standard error.
struct McEstimate {
    double p = 0.0;
    double std_err = 0.0;
    std::size_t trials = 0;
    std::size_t successes = 0;

    static McEstimate from_counts(std::size_t successes, std::size_t trials)
    {
        const double n = static_cast<double>(trials);
        const double p = static_cast<double>(successes) / n;
        return {p, std::sqrt(p * (1.0 - p) / n), trials, successes};
    }
};

struct FieldPoint {
    double x;
    double y;
    double value;
};

/// Samples W (all of S except `i`) or SIR_i on an n x n lattice covering
/// [cx - half, cx + half] x [cy - half, cy + half].  Samples that land on a
/// transmitter get +inf.  With `db`, values are reported as 10 log10.
inline std::vector<FieldPoint> rasterize_field(const PointSet& S, std::size_t i, double alpha,
                                               FieldQuantity q, Point2 center, double half, std::size_t n,
                                               bool db)
{
    detail::require(n >= 2, "raster needs at least 2 samples per side");
    detail::require(half > 0.0, "raster half-width must be positive");
    detail::require(alpha > 2.0, "attenuation alpha must exceed 2");
    std::vector<FieldPoint> out;
    out.reserve(n * n);
    const double step = 2.0 * half / static_cast<double>(n - 1);
    std::optional<SirField> field;
    if (q == FieldQuantity::sir)
        field.emplace(i, S, alpha);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t a = 0; a < n; ++a) {
            const Point2 z{center.x - half + step * static_cast<double>(a),
                           center.y - half + step * static_cast<double>(b)};
            double v = 0.0;
            try {
                v = field ? field->log_sir(z) : std::log(interference(z, S, i, alpha));
                v = db ? 10.0 * v / std::log(10.0) : std::exp(v);
            } catch (const singularity_error&) {
                v = std::numeric_limits<double>::infinity();
            }
            out.push_back({z.x, z.y, v});
        }
    }
    return out;
}

} // namespace macgeo
