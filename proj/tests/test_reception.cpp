#include <macgeo/reception.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace macgeo;

namespace {

PointSet two_transmitters(double D = 1.0)
{
    const std::vector<Point2> pts{{0, 0}, {D, 0}};
    return PointSet::from_points(pts, 1.0, 50.0);
}

// Apollonius circle |z - z1| = c |z - z0| for z0 = 0, z1 = (D, 0), c > 1.
struct Circle {
    Point2 center;
    double radius;
};

Circle apollonius(double D, double c)
{
    const double c2 = c * c;
    return {{-D / (c2 - 1.0), 0.0}, c * D / (c2 - 1.0)};
}

double max_circle_deviation(const ContourTrace& tr, Circle circ)
{
    double dev = 0.0;
    for (auto v : tr.vertices)
        dev = std::max(dev, std::abs(distance(v, circ.center) - circ.radius) / circ.radius);
    return dev;
}

ChannelModel model(double beta, double alpha)
{
    return {alpha, beta, Fading::none()};
}

} // namespace

TEST(FindContourStart, ApolloniusPointTowardInterferer)
{
    const Point2 z = find_contour_start(0, two_transmitters(), model(16, 4), 0.0);
    EXPECT_NEAR(z.x, 1.0 / 3.0, 1e-6);
    EXPECT_NEAR(z.y, 0.0, 1e-15);
}

TEST(FindContourStart, LargerBetaStartsCloser)
{
    const auto S = gen_grid(GridSpec::square(1), Extent{10});
    const std::size_t o = origin_index(S, 1e-12);
    double prev = 1e9;
    for (double beta : {1.0, 3.0, 10.0, 30.0, 100.0}) {
        const double r = distance(find_contour_start(o, S, model(beta, 4), 0.4), {0, 0});
        EXPECT_LT(r, prev);
        prev = r;
    }
}

TEST(FindContourStart, SymmetricDirectionsGiveSymmetricPoints)
{
    const auto S = gen_grid(GridSpec::square(1), Extent{10});
    const std::size_t o = origin_index(S, 1e-12);
    const double r0 = distance(find_contour_start(o, S, model(10, 4), 0.3), {0, 0});
    for (int q = 1; q < 4; ++q) {
        const double rq = distance(find_contour_start(o, S, model(10, 4), 0.3 + q * std::numbers::pi / 2), {0, 0});
        EXPECT_NEAR(rq, r0, 1e-6 * r0);
    }
    const double rm = distance(find_contour_start(o, S, model(10, 4), -0.3), {0, 0});
    EXPECT_NEAR(rm, r0, 1e-6 * r0);
}

TEST(FindContourStart, UnboundedSignal)
{
    // A lone interferer never pushes SIR below 0.5 on the ray pointing away from it.
    EXPECT_THROW(find_contour_start(0, two_transmitters(), model(0.5, 4), std::numbers::pi),
                 unbounded_region_error);
}

TEST(TraceContour, ApolloniusCircle)
{
    const auto tr = trace_contour(0, two_transmitters(), model(16, 4));
    EXPECT_TRUE(tr.closed);
    EXPECT_GT(tr.steps, 10u);
    EXPECT_LT(max_circle_deviation(tr, apollonius(1.0, 2.0)), 1e-3);
    EXPECT_NEAR(tr.r_lambda, 1.0, 1e-6);
    EXPECT_NEAR(tr.max_range_point.x, -1.0, 1e-5);
}

TEST(TraceContour, VerticesSatisfyTolerance)
{
    const auto S = gen_grid(GridSpec::hexagonal(1), Extent{12});
    const std::size_t o = origin_index(S, 1e-12);
    TracerConfig cfg;
    cfg.contour_tol = 1e-6;
    const auto tr = trace_contour(o, S, model(10, 3.5), cfg);
    for (auto v : tr.vertices)
        EXPECT_LE(std::abs(sir(o, v, S, 3.5) - 10.0) / 10.0, cfg.contour_tol);
}

TEST(TraceContour, BareRecurrenceConvergesAtFirstOrder)
{
    const Circle circ = apollonius(1.0, 2.0);
    TracerConfig cfg;
    cfg.corrector_iterations = 0;
    cfg.dt = 0.01;
    const double e1 = max_circle_deviation(trace_contour(0, two_transmitters(), model(16, 4), cfg), circ);
    cfg.dt = 0.005;
    const double e2 = max_circle_deviation(trace_contour(0, two_transmitters(), model(16, 4), cfg), circ);
    cfg.dt = 0.0025;
    const double e3 = max_circle_deviation(trace_contour(0, two_transmitters(), model(16, 4), cfg), circ);
    EXPECT_NEAR(e1 / e2, 2.0, 0.25);
    EXPECT_NEAR(e2 / e3, 2.0, 0.25);
}

TEST(TraceContour, SquareGridLargeAlphaApproachesVoronoiCell)
{
    const auto S = gen_grid(GridSpec::square(1), Extent{8});
    const std::size_t o = origin_index(S, 1e-12);
    const auto tr = trace_contour(o, S, model(1, 100));
    EXPECT_NEAR(tr.r_lambda, 1.0 / std::numbers::sqrt2, 0.02 / std::numbers::sqrt2);
}

TEST(TraceContour, RejectsBadConfig)
{
    TracerConfig cfg;
    cfg.contour_tol = 0.5;
    EXPECT_THROW(trace_contour(0, two_transmitters(), model(16, 4), cfg), invalid_argument_error);
    cfg = {};
    cfg.max_steps = 10;
    EXPECT_THROW(trace_contour(0, two_transmitters(), model(16, 4), cfg), invalid_argument_error);
}

TEST(TraceContour, StepBudgetExhaustion)
{
    TracerConfig cfg;
    cfg.dt = 1e-5;
    cfg.max_steps = 1000;
    EXPECT_THROW(trace_contour(0, two_transmitters(), model(16, 4), cfg), non_closure_error);
}

TEST(MaxRange, ApolloniusFarPoint)
{
    EXPECT_NEAR(trace_contour(0, two_transmitters(), model(81, 4)).r_lambda, 0.5, 5e-4);
    EXPECT_NEAR(trace_contour(0, two_transmitters(2.0), model(16, 4)).r_lambda, 2.0, 2e-3);
}

TEST(MaxRange, ApolloniusPropertySweep)
{
    detail::Engine eng(21);
    for (int trial = 0; trial < 12; ++trial) {
        const double c = detail::uniform(eng, 1.2, 5.0);
        const double alpha = detail::uniform(eng, 2.5, 8.0);
        const double beta = std::pow(c, alpha);
        const double D = std::exp(detail::uniform(eng, -2, 2));
        const auto tr = trace_contour(0, two_transmitters(D), model(beta, alpha));
        const double expect = D / (c - 1.0);
        EXPECT_NEAR(tr.r_lambda, expect, 1e-3 * expect) << "c=" << c << " alpha=" << alpha;
    }
}

TEST(MaxRange, SquareGridDiagonalCandidatesAgree)
{
    const auto S = gen_grid(GridSpec::square(1), Extent{15});
    const std::size_t o = origin_index(S, 1e-12);
    const auto tr = trace_contour(o, S, model(10, 4));
    const auto mr = max_range(tr, o, S, model(10, 4));
    ASSERT_EQ(mr.candidates.size(), 4u);
    for (const auto& c : mr.candidates) {
        EXPECT_NEAR(c.distance, mr.r_lambda, 1e-6 * mr.r_lambda);
        EXPECT_NEAR(std::abs(c.point.x), std::abs(c.point.y), 1e-5);
    }
    // Smallest polar angle wins the tie: first quadrant diagonal.
    EXPECT_GT(mr.point.x, 0.0);
    EXPECT_GT(mr.point.y, 0.0);
}

TEST(NormalizedRange, Homothety)
{
    EXPECT_DOUBLE_EQ(normalized_range(0.7, 1.0), 0.7);
    EXPECT_NEAR(normalized_range(0.35, 4.0), 0.7, 1e-15);
    EXPECT_THROW(normalized_range(0.0, 1.0), invalid_argument_error);
}

TEST(GridRange, HomotheticInvariance)
{
    for (const auto& [a, b] : {std::pair{GridSpec::square(25), GridSpec::square(50)},
                               std::pair{GridSpec::triangular(25), GridSpec::triangular(50)}}) {
        const auto ra = grid_range(a, Extent{40 * a.d}, model(10, 4));
        const auto rb = grid_range(b, Extent{40 * b.d}, model(10, 4));
        EXPECT_NEAR(ra.r1, rb.r1, 5e-3 * ra.r1);
        EXPECT_NEAR(rb.r_lambda, 2.0 * ra.r_lambda, 1e-6 * rb.r_lambda);
    }
}

TEST(GridRange, TruncationCheckReportsSmallChange)
{
    const auto r = grid_range(GridSpec::square(1), Extent{20}, model(10, 4), {}, true);
    ASSERT_TRUE(r.truncation_change.has_value());
    EXPECT_LT(*r.truncation_change, 1e-3);
    EXPECT_GE(r.extent, 40.0);
}

TEST(SuccessNoFading, ApolloniusMembership)
{
    const auto S = two_transmitters();
    const Circle circ = apollonius(1.0, 2.0);
    detail::Engine eng(4);
    for (int k = 0; k < 200; ++k) {
        const Point2 z{detail::uniform(eng, -1.5, 1.5), detail::uniform(eng, -1.5, 1.5)};
        const double gap = distance(z, circ.center) - circ.radius;
        if (std::abs(gap) < 1e-9)
            continue;
        EXPECT_EQ(grid_success_prob_nofading(0, z, S, model(16, 4)), gap < 0 ? 1.0 : 0.0);
    }
}

TEST(SuccessNoFading, BoundaryAndFarField)
{
    const std::vector<Point2> pts{{-1, 0}, {1, 0}};
    const auto S = PointSet::from_points(pts, 1, 10);
    // SIR is exactly 1 on the bisector.
    EXPECT_EQ(grid_success_prob_nofading(0, {0, 0.7}, S, model(1, 4)), 1.0);
    EXPECT_EQ(grid_success_prob_nofading(0, {1e6, 3}, S, model(1.01, 4)), 0.0);
}

TEST(SuccessNoFading, AgreesWithTracedContour)
{
    for (const auto& spec : {GridSpec::square(1), GridSpec::hexagonal(1), GridSpec::rectangular(1, 1, 2)}) {
        const auto S = gen_grid(spec, Extent{10});
        const std::size_t o = origin_index(S, 1e-12);
        for (double beta : {2.0, 10.0}) {
            const auto tr = trace_contour(o, S, model(beta, 4));
            detail::Engine eng(5);
            for (int k = 0; k < 100; ++k) {
                const Point2 z{detail::uniform(eng, -tr.r_lambda * 1.2, tr.r_lambda * 1.2),
                               detail::uniform(eng, -tr.r_lambda * 1.2, tr.r_lambda * 1.2)};
                EXPECT_EQ(grid_success_prob_nofading(o, z, S, model(beta, 4)) == 1.0, contains(tr, z));
            }
        }
    }
}

TEST(SuccessFading, LimitsAndSingleInterferer)
{
    const ChannelModel ray{4, 1, Fading::exponential()};
    const std::vector<Point2> pts{{-1, 0}, {1, 0}};
    const auto S = PointSet::from_points(pts, 1, 10);
    EXPECT_DOUBLE_EQ(grid_success_prob_fading(0, {0, 0.3}, S, ray), 0.5);
    const auto G = gen_grid(GridSpec::square(1), Extent{6});
    const std::size_t o = origin_index(G, 1e-12);
    EXPECT_NEAR(grid_success_prob_fading(o, {0.3, 0.3}, G, {4, 1e-12, Fading::exponential()}), 1.0, 1e-9);
    EXPECT_THROW(grid_success_prob_fading(o, {0.3, 0.3}, G, model(1, 4)), unsupported_model_error);
}

TEST(SuccessFading, MonotoneInBetaAndWeights)
{
    const auto G = gen_grid(GridSpec::square(1), Extent{6});
    const std::size_t o = origin_index(G, 1e-12);
    detail::Engine eng(6);
    for (int k = 0; k < 30; ++k) {
        const Point2 z{detail::uniform(eng, -0.5, 0.5), detail::uniform(eng, -0.5, 0.5)};
        double prev = 1.0;
        for (double beta : {0.01, 0.1, 1.0, 10.0, 100.0}) {
            const double p = grid_success_prob_fading(o, z, G, {4, beta, Fading::exponential()});
            EXPECT_LE(p, prev);
            prev = p;
        }
        // Pulling one interferer closer raises its weight.
        std::vector<Point2> pts;
        for (std::size_t j = 0; j < G.size(); ++j)
            pts.push_back(G[j]);
        const std::size_t far = G.nearest({3, 2});
        const double p0 = grid_success_prob_fading(o, z, G, {4, 1, Fading::exponential()});
        pts[far] = {pts[far].x * 0.8, pts[far].y * 0.8};
        const double p1 = grid_success_prob_fading(o, z, PointSet::from_points(pts, 1, 6), {4, 1, Fading::exponential()});
        EXPECT_LE(p1, p0);
    }
}

TEST(SuccessFading, MatchesBernoulliMonteCarlo)
{
    const ChannelModel ray{4, 1, Fading::exponential()};
    const auto G = gen_grid(GridSpec::square(1), Extent{6});
    const std::size_t o = origin_index(G, 1e-12);
    const double t = 0.4 / std::numbers::sqrt2;
    const Point2 rx{t, t};
    const double p = grid_success_prob_fading(o, rx, G, ray);

    std::vector<double> gains(G.size());
    for (std::size_t j = 0; j < G.size(); ++j)
        gains[j] = std::pow(distance(G[j], rx), -4.0);
    detail::Engine eng(31);
    const int n = 1'000'000;
    int ok = 0;
    for (int k = 0; k < n; ++k) {
        double w = 0.0, s = 0.0;
        for (std::size_t j = 0; j < G.size(); ++j) {
            const double f = detail::exponential01(eng);
            (j == o ? s : w) += f * gains[j];
        }
        ok += s >= ray.beta * w;
    }
    const double phat = static_cast<double>(ok) / n;
    EXPECT_LE(std::abs(phat - p), 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(TraceContour, SubUnitThresholdEnclosesTransmitterOrSignals)
{
    const auto S = gen_grid(GridSpec::square(1), Extent{6});
    const std::size_t o = origin_index(S, 1e-12);
    for (double beta : {0.9, 0.5}) {
        try {
            const auto tr = trace_contour(o, S, model(beta, 4));
            EXPECT_TRUE(contains(tr, {0, 0}));
            EXPECT_GT(tr.r_lambda, 0.5);
        } catch (const unbounded_region_error&) {
            SUCCEED();
        }
    }
}

TEST(MembershipGrid, MarksTransmitterAndExcludesInterferers)
{
    const auto S = gen_grid(GridSpec::square(1), Extent{4});
    const std::size_t o = origin_index(S, 1e-12);
    const auto cells = membership_grid(o, S, model(0.1, 4), {0, 0}, 1.0, 3);
    ASSERT_EQ(cells.size(), 9u);
    EXPECT_TRUE(cells[4].member);
    EXPECT_FALSE(cells[5].member);
}

TEST(SuccessFading, LibraryMonteCarloMatchesProductAlongDiagonal)
{
    const ChannelModel ray{4, 1, Fading::exponential()};
    const auto G = gen_grid(GridSpec::square(1), Extent{6});
    const std::size_t o = origin_index(G, 1e-12);
    const std::size_t n = 200'000;
    for (int k = 1; k <= 10; ++k) {
        const double t = k / 11.0;
        const double p = grid_success_prob_fading(o, {t, t}, G, ray);
        const auto est = grid_success_mc(o, {t, t}, G, ray, n, 100 + k);
        EXPECT_LE(std::abs(est.p - p), 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12) << t;
    }
    const auto a = grid_success_mc(o, {0.3, 0.3}, G, ray, 50'000, 9, 1);
    const auto b = grid_success_mc(o, {0.3, 0.3}, G, ray, 50'000, 9, 4);
    EXPECT_EQ(a.successes, b.successes);
    EXPECT_THROW(grid_success_mc(o, {0.3, 0.3}, G, model(1, 4), 10, 1), unsupported_model_error);
}
