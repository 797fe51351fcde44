#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "detail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace macgeo {

enum class PatternKind { square, rectangular, hexagonal, triangular, linear };

inline std::string_view to_string(PatternKind kind)
{
    switch (kind) {
    case PatternKind::square: return "square";
    case PatternKind::rectangular: return "rectangular";
    case PatternKind::hexagonal: return "hexagonal";
    case PatternKind::triangular: return "triangular";
    case PatternKind::linear: return "linear";
    }
    return "?";
}

inline PatternKind parse_pattern(std::string_view name)
{
    for (auto k : {PatternKind::square, PatternKind::rectangular, PatternKind::hexagonal,
                   PatternKind::triangular, PatternKind::linear})
        if (to_string(k) == name)
            return k;
    if (name == "rect")
        return PatternKind::rectangular;
    if (name == "hex")
        return PatternKind::hexagonal;
    throw invalid_argument_error("unknown pattern '" + std::string(name) + "'");
}

/// Transmitter lattice: kind, spacing d, aspect factors and pose.
///
/// Rectangular and linear patterns place points k1*d apart along x on rows
/// k2*d apart; every other kind keeps k1 = k2 = 1.  Hexagonal means the
/// honeycomb vertex set (three neighbours at distance d).
struct GridSpec {
    PatternKind kind = PatternKind::square;
    double d = 1.0;
    double k1 = 1.0;
    double k2 = 1.0;
    double rotation = 0.0;
    Point2 translation{};

    static GridSpec square(double d) { return {PatternKind::square, d}; }
    static GridSpec hexagonal(double d) { return {PatternKind::hexagonal, d}; }
    static GridSpec triangular(double d) { return {PatternKind::triangular, d}; }
    static GridSpec rectangular(double d, double k1, double k2)
    {
        return {PatternKind::rectangular, d, k1, k2};
    }
    static GridSpec linear(double d, double k1, double k2) { return {PatternKind::linear, d, k1, k2}; }

    [[nodiscard]] bool has_aspect() const
    {
        return kind == PatternKind::rectangular || kind == PatternKind::linear;
    }

    void validate() const
    {
        detail::require(std::isfinite(d) && d > 0.0, "grid spacing d must be positive");
        detail::require(std::isfinite(rotation), "grid rotation must be finite");
        detail::require(std::isfinite(translation.x) && std::isfinite(translation.y),
                        "grid translation must be finite");
        if (has_aspect()) {
            detail::require(std::isfinite(k1) && std::isfinite(k2) && k1 > 0.0 && k2 > 0.0,
                            "aspect factors k1, k2 must be positive");
            if (kind == PatternKind::rectangular)
                detail::require(k1 <= k2, "rectangular pattern requires k1 <= k2");
            else
                detail::require(k1 < k2, "linear pattern requires k1 < k2");
        } else {
            detail::require(k1 == 1.0 && k2 == 1.0, "k1 = k2 = 1 required for this pattern");
        }
    }
};

struct Extent {
    double half_width = 0.0;

    void validate() const
    {
        detail::require(std::isfinite(half_width) && half_width > 0.0, "extent must be positive");
    }
};

/// Transmitters per unit area of the infinite pattern.
inline double grid_density(const GridSpec& spec)
{
    spec.validate();
    const double d2 = spec.d * spec.d;
    switch (spec.kind) {
    case PatternKind::square: return 1.0 / d2;
    case PatternKind::rectangular:
    case PatternKind::linear: return 1.0 / (spec.k1 * spec.k2 * d2);
    case PatternKind::hexagonal: return 4.0 / (3.0 * std::numbers::sqrt3 * d2);
    case PatternKind::triangular: return 2.0 / (std::numbers::sqrt3 * d2);
    }
    return 0.0;
}

/// Immutable transmitter locations with their nominal density.
///
/// Coordinates are stored as two parallel arrays; `operator[]` assembles a Point2.
class PointSet {
public:
    PointSet() = default;

    PointSet(std::vector<double> xs, std::vector<double> ys, double density, double extent)
        : xs_(std::move(xs)), ys_(std::move(ys)), density_(density), extent_(extent)
    {
        detail::require(xs_.size() == ys_.size(), "coordinate arrays differ in length");
        detail::require(density_ > 0.0, "density must be positive");
        detail::require(extent_ > 0.0, "extent must be positive");
    }

    static PointSet from_points(std::span<const Point2> pts, double density, double extent)
    {
        std::vector<double> xs, ys;
        xs.reserve(pts.size());
        ys.reserve(pts.size());
        for (auto p : pts) {
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
        return PointSet(std::move(xs), std::move(ys), density, extent);
    }

    [[nodiscard]] std::size_t size() const { return xs_.size(); }
    [[nodiscard]] bool empty() const { return xs_.empty(); }
    [[nodiscard]] Point2 operator[](std::size_t i) const { return {xs_[i], ys_[i]}; }
    [[nodiscard]] std::span<const double> xs() const { return xs_; }
    [[nodiscard]] std::span<const double> ys() const { return ys_; }
    [[nodiscard]] double density() const { return density_; }
    [[nodiscard]] double extent() const { return extent_; }

    /// Set when the points came from gen_grid.
    [[nodiscard]] const std::optional<GridSpec>& grid() const { return grid_; }
    /// Set when the points came from gen_poisson.
    [[nodiscard]] const std::optional<std::uint64_t>& seed() const { return seed_; }

    PointSet with_grid(const GridSpec& g) &&
    {
        grid_ = g;
        return std::move(*this);
    }
    PointSet with_seed(std::uint64_t s) &&
    {
        seed_ = s;
        return std::move(*this);
    }

    /// Index of the point nearest to p (first one on ties), or size() if empty.
    [[nodiscard]] std::size_t nearest(Point2 p) const
    {
        std::size_t best = size();
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < size(); ++k) {
            const double dx = xs_[k] - p.x;
            const double dy = ys_[k] - p.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = k;
            }
        }
        return best;
    }

private:
    std::vector<double> xs_;
    std::vector<double> ys_;
    double density_ = 1.0;
    double extent_ = 1.0;
    std::optional<GridSpec> grid_;
    std::optional<std::uint64_t> seed_;
};

namespace detail {

struct Lattice {
    Vector2 a1;
    Vector2 a2;
    std::vector<Vector2> basis;
};

inline Lattice lattice_of(const GridSpec& spec)
{
    const double d = spec.d;
    const double h = std::numbers::sqrt3 * d;
    switch (spec.kind) {
    case PatternKind::square: return {{d, 0}, {0, d}, {{0, 0}}};
    case PatternKind::rectangular:
    case PatternKind::linear: return {{spec.k1 * d, 0}, {0, spec.k2 * d}, {{0, 0}}};
    case PatternKind::triangular: return {{d, 0}, {d / 2, h / 2}, {{0, 0}}};
    case PatternKind::hexagonal: return {{h, 0}, {h / 2, 1.5 * d}, {{0, 0}, {0, d}}};
    }
    return {};
}

} // namespace detail

/// All pattern points (after the pose transform) inside [-extent, extent]^2.
///
/// Points on the boundary are kept (tolerance 1e-9 d).  Returns an empty set
/// when the extent is smaller than d.
inline PointSet gen_grid(const GridSpec& spec, Extent extent)
{
    spec.validate();
    extent.validate();
    const double density = grid_density(spec);
    const double E = extent.half_width;
    if (E < spec.d)
        return PointSet({}, {}, density, E).with_grid(spec);

    const auto lat = detail::lattice_of(spec);
    const double det = cross(lat.a1, lat.a2);
    const double tol = 1e-9 * spec.d;
    const double c = std::cos(spec.rotation);
    const double s = std::sin(spec.rotation);

    // Index ranges from the square's corners mapped back into lattice coordinates.
    double imin = std::numeric_limits<double>::infinity(), imax = -imin;
    double jmin = imin, jmax = -imin;
    for (double cx : {-E, E}) {
        for (double cy : {-E, E}) {
            const Vector2 q0{cx - spec.translation.x, cy - spec.translation.y};
            const Vector2 q{c * q0.dx + s * q0.dy, -s * q0.dx + c * q0.dy};
            const double i = cross(q, lat.a2) / det;
            const double j = cross(lat.a1, q) / det;
            imin = std::min(imin, i);
            imax = std::max(imax, i);
            jmin = std::min(jmin, j);
            jmax = std::max(jmax, j);
        }
    }
    const auto i0 = static_cast<long long>(std::floor(imin)) - 2;
    const auto i1 = static_cast<long long>(std::ceil(imax)) + 2;
    const auto j0 = static_cast<long long>(std::floor(jmin)) - 2;
    const auto j1 = static_cast<long long>(std::ceil(jmax)) + 2;

    std::vector<double> xs, ys;
    const double expected = density * 4.0 * E * E * 1.05 + 16.0;
    xs.reserve(static_cast<std::size_t>(expected));
    ys.reserve(static_cast<std::size_t>(expected));
    for (long long j = j0; j <= j1; ++j) {
        for (long long i = i0; i <= i1; ++i) {
            const Vector2 cell = static_cast<double>(i) * lat.a1 + static_cast<double>(j) * lat.a2;
            for (const auto& b : lat.basis) {
                const Vector2 v = cell + b;
                const double x = spec.translation.x + c * v.dx - s * v.dy;
                const double y = spec.translation.y + s * v.dx + c * v.dy;
                if (std::abs(x) <= E + tol && std::abs(y) <= E + tol) {
                    xs.push_back(x);
                    ys.push_back(y);
                }
            }
        }
    }
    return PointSet(std::move(xs), std::move(ys), density, E).with_grid(spec);
}

/// Homogeneous Poisson scatter on [-extent, extent]^2.
inline PointSet gen_poisson(double lambda, Extent extent, std::uint64_t seed)
{
    detail::require(std::isfinite(lambda) && lambda > 0.0, "Poisson density must be positive");
    extent.validate();
    const double E = extent.half_width;
    auto eng = detail::make_engine(seed, 0);
    std::poisson_distribution<long long> count_dist(lambda * 4.0 * E * E);
    const auto n = static_cast<std::size_t>(count_dist(eng));
    std::vector<double> xs(n), ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        xs[k] = detail::uniform(eng, -E, E);
        ys[k] = detail::uniform(eng, -E, E);
    }
    return PointSet(std::move(xs), std::move(ys), lambda, E).with_seed(seed);
}

/// Homothety: coordinates times `factor`, density divided by factor^2.
inline PointSet rescale(const PointSet& ps, double factor)
{
    detail::require(std::isfinite(factor) && factor > 0.0, "rescale factor must be positive");
    std::vector<double> xs(ps.xs().begin(), ps.xs().end());
    std::vector<double> ys(ps.ys().begin(), ps.ys().end());
    for (auto& x : xs)
        x *= factor;
    for (auto& y : ys)
        y *= factor;
    PointSet out(std::move(xs), std::move(ys), ps.density() / (factor * factor), ps.extent() * factor);
    if (ps.grid()) {
        GridSpec g = *ps.grid();
        g.d *= factor;
        g.translation = {g.translation.x * factor, g.translation.y * factor};
        out = std::move(out).with_grid(g);
    }
    if (ps.seed())
        out = std::move(out).with_seed(*ps.seed());
    return out;
}

/// Index of the pattern point at the origin, or size() if there is none.
inline std::size_t origin_index(const PointSet& ps, double tol)
{
    const std::size_t k = ps.nearest({0.0, 0.0});
    if (k < ps.size() && ps[k].as_vector().norm() <= tol)
        return k;
    return ps.size();
}

} // namespace macgeo
