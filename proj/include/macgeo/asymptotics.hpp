#pragma once

#include "detail/compensated_sum.hpp"
#include "errors.hpp"
#include "reception.hpp"
#include "spatial.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace macgeo {

/// Lattice sum sum_{j != 0} |z_j|^-alpha over a pattern at unit density.
///
/// The truncation radius is given in the pattern's own units; it is carried
/// along when the pattern is rescaled to unit density.
struct LatticeSumConfig {
    GridSpec pattern = GridSpec::square(1.0);
    double alpha = 4.0;
    double truncation_radius = 400.0;
    /// Number of radius doublings for the Richardson estimate; 0 disables it.
    int richardson_levels = 0;

    static LatticeSumConfig for_pattern(const GridSpec& spec, double alpha)
    {
        return {spec, alpha, 400.0 * spec.d, 0};
    }

    void validate() const
    {
        pattern.validate();
        if (!(alpha > 2.0))
            throw divergence_error("lattice sum diverges for alpha <= 2");
        detail::require(std::isfinite(alpha), "attenuation alpha must be finite");
        detail::require(std::isfinite(truncation_radius) && truncation_radius >= 100.0 * pattern.d,
                        "truncation radius must be at least 100 d");
        detail::require(richardson_levels >= 0 && richardson_levels <= 3, "richardson_levels must be in [0, 3]");
    }
};

struct LatticeSum {
    /// Direct sum plus continuum tail, at unit density.
    double interference = 0.0;
    double direct = 0.0;
    double tail = 0.0;
    /// Truncation radius after rescaling to unit density.
    double radius = 0.0;
    std::size_t points = 0;
    /// Tail-free estimate from direct sums at radius * 2^k, when requested.
    std::optional<double> richardson;
};

struct BetaInfRange {
    double r1 = 0.0;
    LatticeSum sum;
};

namespace detail {

/// sum of |z|^-alpha over pattern points with 0 < |z| <= R, pattern at unit density.
inline std::pair<double, std::size_t> direct_lattice_sum(const GridSpec& unit, double alpha, double R)
{
    const auto lat = lattice_of(unit);
    const double det = std::abs(cross(lat.a1, lat.a2));
    // Index bound: |i a1 + j a2| <= R implies |i|, |j| <= R * |a_other| / det.
    const auto imax = static_cast<long long>(std::ceil(R * lat.a2.norm() / det)) + 2;
    const auto jmax = static_cast<long long>(std::ceil(R * lat.a1.norm() / det)) + 2;
    const double R2 = R * R;
    const double tiny = 1e-18 * unit.d * unit.d;
    const NegPow negpow(alpha);
    CompensatedSum acc;
    std::size_t n = 0;
    for (long long j = -jmax; j <= jmax; ++j) {
        for (long long i = -imax; i <= imax; ++i) {
            const Vector2 cell = static_cast<double>(i) * lat.a1 + static_cast<double>(j) * lat.a2;
            for (const auto& b : lat.basis) {
                const double r2 = (cell + b).norm2();
                if (r2 > R2 || r2 < tiny)
                    continue;
                acc.add(negpow(r2));
                ++n;
            }
        }
    }
    return {acc.value(), n};
}

inline double continuum_tail(double alpha, double R)
{
    return 2.0 * std::numbers::pi * std::pow(R, 2.0 - alpha) / (alpha - 2.0);
}

} // namespace detail

/// Pattern with the same shape at unit density, pose removed.
inline GridSpec unit_density(const GridSpec& spec)
{
    GridSpec unit = spec;
    unit.d = spec.d * std::sqrt(grid_density(spec));
    unit.rotation = 0.0;
    unit.translation = {};
    return unit;
}

/// Interference at a pattern point from every other point, unit density.
inline LatticeSum lattice_sum(const LatticeSumConfig& cfg)
{
    cfg.validate();
    const GridSpec unit = unit_density(cfg.pattern);
    const double R = cfg.truncation_radius * unit.d / cfg.pattern.d;
    LatticeSum out;
    const auto [direct, n] = detail::direct_lattice_sum(unit, cfg.alpha, R);
    out.direct = direct;
    out.points = n;
    out.radius = R;
    out.tail = detail::continuum_tail(cfg.alpha, R);
    out.interference = direct + out.tail;
    if (cfg.richardson_levels > 0) {
        // Eliminates the leading c R^(2 - alpha) truncation term between the
        // last two doublings.
        double prev = direct, last = direct;
        for (int k = 1; k <= cfg.richardson_levels; ++k) {
            prev = last;
            last = detail::direct_lattice_sum(unit, cfg.alpha, R * std::ldexp(1.0, k)).first;
        }
        const double q = std::pow(2.0, cfg.alpha - 2.0);
        out.richardson = last + (last - prev) / (q - 1.0);
    }
    return out;
}

/// Normalized range as beta -> infinity: I(0,0)^(-1/alpha) at unit density.
inline BetaInfRange beta_inf_range(const LatticeSumConfig& cfg)
{
    const auto sum = lattice_sum(cfg);
    return {std::pow(sum.interference, -1.0 / cfg.alpha), sum};
}

/// Normalized range as alpha -> infinity: circumradius of the Voronoi cell at unit density.
inline double alpha_inf_range(PatternKind kind, double k1 = 1.0, double k2 = 1.0)
{
    const double s3 = std::numbers::sqrt3;
    switch (kind) {
    case PatternKind::square: return 1.0 / std::numbers::sqrt2;
    case PatternKind::hexagonal: return 2.0 / std::sqrt(3.0 * s3);
    case PatternKind::triangular: return std::sqrt(2.0 / (3.0 * s3));
    case PatternKind::rectangular:
    case PatternKind::linear: {
        detail::require(std::isfinite(k1) && std::isfinite(k2) && k1 > 0.0 && k2 > 0.0,
                        "aspect factors k1, k2 must be positive");
        const double rho = k1 / k2;
        return 0.5 * std::sqrt((rho * rho + 1.0) / rho);
    }
    }
    return 0.0;
}

inline double alpha_inf_range(const GridSpec& spec)
{
    spec.validate();
    return alpha_inf_range(spec.kind, spec.k1, spec.k2);
}

struct VoronoiDeviation {
    double traced = 0.0;
    double closed_form = 0.0;
    double relative = 0.0;
};

/// Traces the beta = 1 reception area at large alpha and compares its range
/// with the Voronoi circumradius.
inline VoronoiDeviation voronoi_limit_check(const GridSpec& spec, double alpha_large, Fading fading = {},
                                            const TracerConfig& tracer = {})
{
    detail::require(std::isfinite(alpha_large) && alpha_large >= 50.0, "alpha_large must be at least 50");
    const ChannelModel model{alpha_large, 1.0, fading};
    const double span = std::max(spec.k1, spec.k2) * spec.d;
    const auto res = grid_range(spec, Extent{20.0 * span}, model, tracer);
    const double closed = alpha_inf_range(spec);
    return {res.r1, closed, std::abs(res.r1 - closed) / closed};
}

struct TableRow {
    PatternKind pattern = PatternKind::square;
    double k1_over_k2 = 1.0;
    double value = 0.0;
};

/// Patterns of the two asymptotic tables, in table order.
inline std::vector<GridSpec> table_patterns()
{
    return {GridSpec::square(1.0), GridSpec::rectangular(1.0, 1.0, 2.0), GridSpec::rectangular(1.0, 1.0, 4.0),
            GridSpec::hexagonal(1.0), GridSpec::triangular(1.0)};
}

inline std::vector<TableRow> beta_inf_table(double alpha, double truncation_factor = 400.0, int richardson_levels = 0)
{
    std::vector<TableRow> rows;
    for (const auto& spec : table_patterns()) {
        LatticeSumConfig cfg{spec, alpha, truncation_factor * spec.d, richardson_levels};
        rows.push_back({spec.kind, spec.k1 / spec.k2, beta_inf_range(cfg).r1});
    }
    return rows;
}

inline std::vector<TableRow> alpha_inf_table()
{
    std::vector<TableRow> rows;
    for (const auto& spec : table_patterns())
        rows.push_back({spec.kind, spec.k1 / spec.k2, alpha_inf_range(spec)});
    return rows;
}

} // namespace macgeo
