#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "propagation.hpp"
#include "spatial.hpp"
#include "detail/parallel.hpp"

#include <boost/random/exponential_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace macgeo {

/// Step control for the level-set follower.  dt = 0 selects d/200 (or
/// 1/(200 sqrt(lambda)) for sets without a grid spacing).
struct TracerConfig {
    double dt = 0.0;
    double contour_tol = 1e-6;
    std::size_t max_steps = 1'000'000;
    double start_direction = 0.0;
    /// Newton iterations per step; 0 runs the bare Euler recurrence.
    int corrector_iterations = 5;

    void validate() const
    {
        detail::require(std::isfinite(dt) && dt >= 0.0, "tracer dt must be non-negative");
        detail::require(contour_tol > 0.0 && contour_tol <= 0.1, "contour_tol must lie in (0, 0.1]");
        detail::require(max_steps >= 1000, "max_steps must be at least 1000");
        detail::require(std::isfinite(start_direction), "start direction must be finite");
        detail::require(corrector_iterations >= 0, "corrector_iterations must be non-negative");
    }
};

/// Refined critical point of the distance to the transmitter along the contour.
struct RangeCandidate {
    Point2 point;
    double distance = 0.0;
};

struct MaxRange {
    Point2 point;
    double r_lambda = 0.0;
    /// All refined local extrema near the maximum, sorted by polar angle.
    std::vector<RangeCandidate> candidates;
};

/// Closed polyline approximating {z : SIR_i(z) = beta}, counter-clockwise.
/// The closing segment back to vertices.front() is implicit.
struct ContourTrace {
    std::vector<Point2> vertices;
    Point2 transmitter;
    Point2 max_range_point;
    double r_lambda = 0.0;
    double dt = 0.0;
    bool closed = false;
    std::size_t steps = 0;
    /// Start rays tried before one led to the component around the transmitter.
    int start_attempts = 1;
};

struct RangeResult {
    double r_lambda = 0.0;
    double r1 = 0.0;
    double lambda = 0.0;
    std::string pattern;
    /// Relative change of r1 when the extent is doubled, when checked.
    std::optional<double> truncation_change;
    double extent = 0.0;
    ContourTrace trace;
};

inline double normalized_range(double r_lambda, double lambda)
{
    detail::require(r_lambda > 0.0 && lambda > 0.0, "range and density must be positive");
    return std::sqrt(lambda) * r_lambda;
}

namespace detail {

inline double default_dt(const PointSet& S)
{
    const double d = S.grid() ? S.grid()->d : 1.0 / std::sqrt(S.density());
    return d / 200.0;
}

inline bool inside_extent(const PointSet& S, Point2 z)
{
    const double E = S.extent();
    return std::abs(z.x) <= E && std::abs(z.y) <= E;
}

/// Newton iterations on log S - log beta along the gradient.  Returns false
/// when the tolerance is not met.
inline bool project_to_level(const SirField& field, double log_beta, Point2& z, double tol, int iterations)
{
    for (int it = 0; it < iterations; ++it) {
        const auto s = field.sample(z);
        const double f = s.log_sir - log_beta;
        if (std::abs(f) <= tol)
            return true;
        const double g2 = s.grad_log.norm2();
        if (!(g2 > 0.0) || !std::isfinite(g2))
            return false;
        z = z - (f / g2) * s.grad_log;
    }
    return std::abs(field.log_sir(z) - log_beta) <= tol;
}

inline double relative_sir_error(double log_sir, double log_beta)
{
    return std::abs(std::expm1(log_sir - log_beta));
}

inline Point2 find_start(const SirField& field, const PointSet& S, double beta, double direction, double tol)
{
    const double log_beta = std::log(beta);
    const Point2 zi = field.origin();
    const Vector2 u{std::cos(direction), std::sin(direction)};
    const double h = field.unit() / 64.0;
    const double max_t = 2.0 * std::numbers::sqrt2 * S.extent();
    auto f = [&](double t) { return field.log_sir(zi + t * u) - log_beta; };

    double lo = 0.0;
    double hi = h;
    while (f(hi) >= 0.0) {
        lo = hi;
        hi += h;
        if (hi > max_t || !inside_extent(S, zi + hi * u))
            throw unbounded_region_error("no SIR crossing along the start ray inside the extent");
    }
    if (lo == 0.0)
        lo = hi * 1e-6;
    // The SIR tends to infinity at the transmitter, so [lo, hi] brackets a crossing.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (relative_sir_error(fm + log_beta, log_beta) <= 0.5 * tol || hi - lo <= 1e-15 * hi)
            return zi + mid * u;
        (fm >= 0.0 ? lo : hi) = mid;
    }
    return zi + 0.5 * (lo + hi) * u;
}

inline int winding_number(const std::vector<Point2>& poly, Point2 p)
{
    int wn = 0;
    const std::size_t n = poly.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Point2 a = poly[k];
        const Point2 b = poly[(k + 1) % n];
        const double side = cross(b - a, p - a);
        if (a.y <= p.y) {
            if (b.y > p.y && side > 0.0)
                ++wn;
        } else if (b.y <= p.y && side < 0.0) {
            --wn;
        }
    }
    return wn;
}

struct RawTrace {
    std::vector<Point2> vertices;
    std::size_t steps = 0;
};

inline RawTrace follow_level(const SirField& field, const PointSet& S, double beta, Point2 start,
                             const TracerConfig& cfg, double dt)
{
    const double log_beta = std::log(beta);
    // Newton target well inside the requested relative tolerance.
    const double ftol = 0.05 * cfg.contour_tol;
    const bool corrected = cfg.corrector_iterations > 0;

    RawTrace out;
    out.vertices.push_back(start);
    Point2 z = start;
    std::optional<Vector2> t0;
    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        const auto s = field.sample(z);
        const double gnorm = s.grad_log.norm();
        if (!(gnorm * field.unit() >= 1e-15))
            throw stationary_point_error("SIR gradient vanished on the contour");
        const Vector2 tangent = rotate_cw(s.grad_log) / gnorm;
        if (!t0)
            t0 = tangent;

        Point2 next;
        double h = dt;
        for (int halving = 0;; ++halving) {
            next = z + h * tangent;
            if (!corrected || project_to_level(field, log_beta, next, ftol, cfg.corrector_iterations))
                break;
            if (halving == 30)
                throw non_closure_error("level-set corrector failed to converge");
            h *= 0.5;
        }
        if (!inside_extent(S, next))
            throw unbounded_region_error("contour leaves the network extent");
        ++out.steps;

        if (out.steps >= 10) {
            const Vector2 off = next - start;
            if (off.norm() <= dt)
                return out;
            // The bare recurrence drifts by O(dt) per lap, so it closes on crossing
            // the start normal instead.
            if (!corrected && off.norm() <= 8.0 * dt && dot(z - start, *t0) < 0.0 && dot(off, *t0) >= 0.0)
                return out;
        }
        out.vertices.push_back(next);
        z = next;
    }
    throw non_closure_error("contour did not close within max_steps");
}

} // namespace detail

/// Point on the ray from z_i at angle `direction` where SIR_i equals beta.
inline Point2 find_contour_start(std::size_t i, const PointSet& S, const ChannelModel& model, double direction,
                                 double contour_tol = 1e-6)
{
    model.validate();
    const SirField field(i, S, model.alpha);
    return detail::find_start(field, S, model.beta, direction, contour_tol);
}

/// Locates local maxima of |z - z_i| along a traced contour.
///
/// Brackets are sign changes of cross(z - z_i, grad S) between consecutive
/// vertices; each is refined by bisection on the chord with re-projection onto
/// the level set.  Ties (relative 1e-9) go to the smallest polar angle.
inline MaxRange max_range(const ContourTrace& trace, std::size_t i, const PointSet& S, const ChannelModel& model)
{
    model.validate();
    detail::require(trace.vertices.size() >= 3, "trace has too few vertices");
    const SirField field(i, S, model.alpha);
    const Point2 zi = field.origin();
    const double log_beta = std::log(model.beta);
    const auto& v = trace.vertices;
    const std::size_t n = v.size();

    double vmax = 0.0;
    std::size_t kmax = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dk = distance(v[k], zi);
        if (dk > vmax) {
            vmax = dk;
            kmax = k;
        }
    }

    auto crit = [&](Point2 z) { return cross(z - zi, field.sample(z).grad_log); };
    std::vector<double> c(n);
    for (std::size_t k = 0; k < n; ++k)
        c[k] = crit(v[k]);

    // Only brackets that can hold a maximum competitive with the best vertex matter.
    const double floor_dist = vmax * (1.0 - 1e-2);
    std::vector<RangeCandidate> found;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k1 = (k + 1) % n;
        if (!trace.closed && k1 == 0)
            break;
        if ((c[k] > 0.0) == (c[k1] > 0.0))
            continue;
        if (std::max(distance(v[k], zi), distance(v[k1], zi)) < floor_dist)
            continue;
        double lo = 0.0, hi = 1.0;
        const bool lo_pos = c[k] > 0.0;
        Point2 best = v[k];
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            Point2 z = v[k] + mid * (v[k1] - v[k]);
            detail::project_to_level(field, log_beta, z, 1e-13, 8);
            best = z;
            ((crit(z) > 0.0) == lo_pos ? lo : hi) = mid;
            if (hi - lo < 1e-14)
                break;
        }
        found.push_back({best, distance(best, zi)});
    }

    MaxRange out;
    if (found.empty()) {
        out.point = v[kmax];
        out.r_lambda = vmax;
        out.candidates.push_back({v[kmax], vmax});
        return out;
    }
    std::sort(found.begin(), found.end(), [&](const RangeCandidate& a, const RangeCandidate& b) {
        return polar_angle(a.point - zi) < polar_angle(b.point - zi);
    });
    double rmax = 0.0;
    for (const auto& f : found)
        rmax = std::max(rmax, f.distance);
    for (const auto& f : found) {
        if (f.distance >= rmax * (1.0 - 1e-9)) {
            out.point = f.point;
            out.r_lambda = f.distance;
            break;
        }
    }
    out.candidates = std::move(found);
    return out;
}

/// Follows SIR_i = beta around transmitter i.
///
/// Each Euler step along J grad S / |grad S| is followed by Newton correction
/// back to the level set.  If the component reached from the start ray does
/// not enclose z_i (a hole around an interferer, possible for beta < 1),
/// seven further start directions are tried before giving up.
inline ContourTrace trace_contour(std::size_t i, const PointSet& S, const ChannelModel& model,
                                  const TracerConfig& cfg = {})
{
    model.validate();
    cfg.validate();
    const SirField field(i, S, model.alpha);
    const double dt = cfg.dt > 0.0 ? cfg.dt : detail::default_dt(S);

    for (int attempt = 0; attempt < 8; ++attempt) {
        const double dir = cfg.start_direction + attempt * std::numbers::pi / 4.0 + (attempt ? 0.1 : 0.0);
        const Point2 start = detail::find_start(field, S, model.beta, dir, cfg.contour_tol);
        auto raw = detail::follow_level(field, S, model.beta, start, cfg, dt);
        if (detail::winding_number(raw.vertices, field.origin()) == 0)
            continue;
        ContourTrace tr;
        tr.vertices = std::move(raw.vertices);
        tr.transmitter = field.origin();
        tr.dt = dt;
        tr.closed = true;
        tr.steps = raw.steps;
        tr.start_attempts = attempt + 1;
        const auto mr = max_range(tr, i, S, model);
        tr.max_range_point = mr.point;
        tr.r_lambda = mr.r_lambda;
        return tr;
    }
    throw unbounded_region_error("no traced contour encloses the transmitter");
}

/// Winding-number membership test against the traced polyline.
inline bool contains(const ContourTrace& trace, Point2 p)
{
    return detail::winding_number(trace.vertices, p) != 0;
}

/// Heaviside reception: 1 when r^-alpha / beta >= W(rx).
inline double grid_success_prob_nofading(std::size_t i, Point2 rx, const PointSet& S, const ChannelModel& model)
{
    model.validate();
    detail::require(i < S.size(), "transmitter index out of range");
    const double r = distance(S[i], rx);
    if (r < detail::singular_radius(S))
        throw singularity_error("receiver coincides with the transmitter");
    const double w = interference(rx, S, i, model.alpha);
    return std::pow(r, -model.alpha) / model.beta >= w ? 1.0 : 0.0;
}

/// Exact success probability with exponential fading on every link:
/// prod_j 1 / (1 + beta w_j), w_j the interferer-to-signal gain ratio.
inline double grid_success_prob_fading(std::size_t i, Point2 rx, const PointSet& S, const ChannelModel& model)
{
    model.validate();
    if (model.fading.kind != FadingKind::exponential)
        throw unsupported_model_error("product formula requires exponential fading");
    detail::require(i < S.size(), "transmitter index out of range");
    const double rs = detail::singular_radius(S);
    const double ri = distance(S[i], rx);
    if (ri < rs)
        throw singularity_error("receiver coincides with the transmitter");
    double log_p = 0.0;
    for (std::size_t j = 0; j < S.size(); ++j) {
        if (j == i)
            continue;
        const double rj = distance(S[j], rx);
        if (rj < rs)
            throw singularity_error("receiver coincides with an interferer");
        const double w = std::pow(ri / rj, model.alpha);
        log_p -= std::log1p(model.beta * w);
    }
    return std::exp(log_p);
}

/// Bernoulli Monte Carlo of reception with exponential fading drawn on every
/// link: success when F_i r_i^-alpha >= beta sum_j F_j r_j^-alpha.
/// Deterministic per seed regardless of the thread count.
inline McEstimate grid_success_mc(std::size_t i, Point2 rx, const PointSet& S, const ChannelModel& model,
                                  std::size_t trials, std::uint64_t seed, unsigned threads = 0)
{
    model.validate();
    if (model.fading.kind != FadingKind::exponential)
        throw unsupported_model_error("fading Monte Carlo requires exponential fading");
    detail::require(i < S.size(), "transmitter index out of range");
    detail::require(trials >= 1, "at least one trial required");
    const double rs = detail::singular_radius(S);
    const double ri = distance(S[i], rx);
    if (ri < rs)
        throw singularity_error("receiver coincides with the transmitter");
    // Interferer gains relative to the signal, strongest first so the
    // running sum crosses the signal early.
    std::vector<double> w;
    w.reserve(S.size());
    for (std::size_t j = 0; j < S.size(); ++j) {
        if (j == i)
            continue;
        const double rj = distance(S[j], rx);
        if (rj < rs)
            throw singularity_error("receiver coincides with an interferer");
        w.push_back(model.beta * std::pow(ri / rj, model.alpha));
    }
    std::sort(w.begin(), w.end(), std::greater<>());

    constexpr std::size_t chunk = 16384;
    const std::size_t n_chunks = (trials + chunk - 1) / chunk;
    const unsigned workers = detail::worker_count(threads, n_chunks);
    std::vector<std::size_t> hits(workers, 0);
    detail::for_each_chunk(n_chunks, workers, [&](unsigned wk, std::size_t c) {
        auto eng = detail::make_engine(seed, c);
        boost::random::exponential_distribution<double> expo;
        const std::size_t n = std::min(chunk, trials - c * chunk);
        std::size_t ok = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double signal = expo(eng);
            double acc = 0.0;
            std::size_t j = 0;
            for (; j < w.size() && acc <= signal; ++j)
                acc += w[j] * expo(eng);
            ok += acc <= signal;
        }
        hits[wk] += ok;
    });
    std::size_t total = 0;
    for (auto h : hits)
        total += h;
    return McEstimate::from_counts(total, trials);
}

/// Range of the transmitter at the origin of a generated grid.
///
/// With `check_truncation`, the extent is doubled (at most twice) until r1
/// moves by less than 1e-3 relative; the last relative change is reported.
inline RangeResult grid_range(const GridSpec& spec, Extent extent, const ChannelModel& model,
                              const TracerConfig& cfg = {}, bool check_truncation = false)
{
    spec.validate();
    extent.validate();
    auto run = [&](double E) {
        const PointSet S = gen_grid(spec, Extent{E});
        const std::size_t i0 = origin_index(S, 1e-9 * spec.d);
        if (i0 == S.size())
            throw invalid_argument_error("grid has no transmitter at the origin");
        RangeResult res;
        res.trace = trace_contour(i0, S, model, cfg);
        res.r_lambda = res.trace.r_lambda;
        res.lambda = S.density();
        res.r1 = normalized_range(res.r_lambda, res.lambda);
        res.pattern = std::string(to_string(spec.kind));
        res.extent = E;
        return res;
    };
    RangeResult res = run(extent.half_width);
    if (!check_truncation)
        return res;
    double E = extent.half_width;
    for (int doubling = 0; doubling < 2; ++doubling) {
        E *= 2.0;
        RangeResult wider = run(E);
        const double change = std::abs(wider.r1 - res.r1) / wider.r1;
        wider.truncation_change = change;
        res = std::move(wider);
        if (change < 1e-3)
            break;
    }
    return res;
}

struct MembershipPoint {
    double x;
    double y;
    bool member;
};

/// Heaviside reception indicator of transmitter i on an n x n raster,
/// used for thresholds where the reception area is not a single closed curve.
inline std::vector<MembershipPoint> membership_grid(std::size_t i, const PointSet& S, const ChannelModel& model,
                                                    Point2 center, double half, std::size_t n)
{
    model.validate();
    detail::require(n >= 2 && half > 0.0, "membership raster needs n >= 2 and half > 0");
    const SirField field(i, S, model.alpha);
    const double log_beta = std::log(model.beta);
    const double step = 2.0 * half / static_cast<double>(n - 1);
    std::vector<MembershipPoint> out;
    out.reserve(n * n);
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t a = 0; a < n; ++a) {
            const Point2 z{center.x - half + step * static_cast<double>(a),
                           center.y - half + step * static_cast<double>(b)};
            bool member = false;
            try {
                member = field.log_sir(z) >= log_beta;
            } catch (const singularity_error&) {
                member = S.nearest(z) == i;
            }
            out.push_back({z.x, z.y, member});
        }
    }
    return out;
}

} // namespace macgeo
