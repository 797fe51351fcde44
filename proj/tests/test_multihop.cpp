#include <macgeo/multihop.hpp>
#include <macgeo/reception.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace macgeo;

namespace {

const GridSpec square25 = GridSpec::square(25.0);

double square_range()
{
    static const double r = grid_range(square25, Extent{1000.0}, {4.0, 10.0, {}}).r_lambda;
    return r;
}

SimConfig dense_square(double ratio = 100.0)
{
    SimConfig cfg;
    cfg.scheme = MacScheme::grid_pattern(square25);
    cfg.node_density = ratio * grid_density(square25);
    cfg.model = {4.0, 10.0, {}};
    cfg.extent = Extent{250.0};
    cfg.route_length = 5.0 * square_range();
    cfg.slots = 20'000;
    cfg.seed = 7;
    return cfg;
}

} // namespace

TEST(Progress, ProjectionExamples)
{
    EXPECT_DOUBLE_EQ(progress({0, 0}, {3, 0}, {10, 0}), 3.0);
    EXPECT_DOUBLE_EQ(progress({1, 1}, {1, 4}, {1, 9}), 3.0);
    EXPECT_NEAR(progress({0, 0}, {0, 5}, {10, 0}), 0.0, 1e-15);
    EXPECT_LT(progress({0, 0}, {-2, 1}, {10, 0}), 0.0);
    EXPECT_NEAR(progress({0, 0}, {1, 1}, {3, 3}), std::numbers::sqrt2, 1e-15);
    EXPECT_THROW(progress({2, 2}, {1, 1}, {2, 2}), invalid_argument_error);
}

TEST(NodeIndex, MatchesBruteForce)
{
    const auto nodes = gen_poisson(0.05, Extent{100.0}, 3);
    const NodeIndex index(nodes, 7.0);
    auto eng = detail::make_engine(4, 0);
    for (int q = 0; q < 200; ++q) {
        const Point2 p{detail::uniform(eng, -110, 110), detail::uniform(eng, -110, 110)};
        const double r = detail::uniform(eng, 0.5, 30.0);
        std::vector<std::size_t> got;
        index.for_each_within(p, r, [&](std::size_t k, double) { got.push_back(k); });
        std::sort(got.begin(), got.end());
        std::vector<std::size_t> want;
        std::optional<std::size_t> nearest;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const double d = distance(nodes[k], p);
            if (d <= r) {
                want.push_back(k);
                if (d < best) {
                    best = d;
                    nearest = k;
                }
            }
        }
        ASSERT_EQ(got, want);
        EXPECT_EQ(index.nearest_within(p, r), nearest);
    }
}

TEST(SelectTransmitters, DenseSnappingRecoversGridDensity)
{
    auto cfg = dense_square(2000.0);
    cfg.extent = Extent{200.0};
    const auto nodes = simulation_nodes(cfg);
    const NodeIndex index(nodes, node_bucket_size(cfg));
    // Counts in a fixed window average to area * density over random poses.
    const double W = 150.0;
    std::size_t inside = 0;
    const std::size_t slots = 20;
    for (std::size_t slot = 0; slot < slots; ++slot) {
        const auto tx = select_transmitters(slot, cfg, nodes, index);
        EXPECT_EQ(tx.unmatched, 0u);
        for (std::size_t k = 0; k < tx.points.size(); ++k) {
            const Point2 p = tx.points[k];
            inside += (p.x >= -W && p.x < W && p.y >= -W && p.y < W);
        }
        for (std::size_t k = 1; k < tx.nodes.size(); ++k)
            EXPECT_LT(tx.nodes[k - 1], tx.nodes[k]);
    }
    const double density = static_cast<double>(inside) / static_cast<double>(slots) / (4.0 * W * W);
    EXPECT_NEAR(density / grid_density(square25), 1.0, 0.02);
}

TEST(SelectTransmitters, SparseNodesReportUnmatchedPoints)
{
    auto cfg = dense_square(3.0);
    const auto nodes = simulation_nodes(cfg);
    const NodeIndex index(nodes, node_bucket_size(cfg));
    const auto tx = select_transmitters(0, cfg, nodes, index);
    // Pr(no node within d/10) = exp(-nu pi d^2 / 100) = exp(-0.03 pi) at nu = 3 lambda.
    EXPECT_GT(tx.unmatched_fraction(), 0.8);
    EXPECT_EQ(tx.nodes.size() + tx.unmatched, tx.virtual_points);
    cfg.slots = 3;
    cfg.route_length = 10.0;
    const auto res = run_simulation(cfg, 1);
    ASSERT_FALSE(res.summary.warnings.empty());
    EXPECT_NE(res.summary.warnings.front().find("unmatched"), std::string::npos);
}

TEST(SelectTransmitters, AlohaThinningFraction)
{
    SimConfig cfg;
    cfg.scheme = MacScheme::aloha(0.01);
    cfg.node_density = 0.08;
    cfg.extent = Extent{200.0};
    const auto nodes = simulation_nodes(cfg);
    const NodeIndex index(nodes, node_bucket_size(cfg));
    const double q = 0.01 / 0.08;
    std::size_t hits = 0, trials = 0;
    for (std::size_t slot = 0; slot < 20; ++slot) {
        hits += select_transmitters(slot, cfg, nodes, index).nodes.size();
        trials += nodes.size();
    }
    const double n = static_cast<double>(trials);
    EXPECT_LE(std::abs(static_cast<double>(hits) / n - q), 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST(SelectTransmitters, ConsecutivePosesIndependent)
{
    const auto cfg = dense_square();
    const auto nodes = simulation_nodes(cfg);
    const NodeIndex index(nodes, node_bucket_size(cfg));
    const int n = 400;
    std::vector<double> rot(n);
    std::vector<std::size_t> anchor(n);
    for (int s = 0; s < n; ++s) {
        const auto tx = select_transmitters(static_cast<std::size_t>(s), cfg, nodes, index);
        rot[s] = tx.rotation;
        anchor[s] = tx.anchor;
    }
    // Lag-one correlation of rotations and of anchor x coordinates.
    auto lag1 = [&](auto value) {
        double m = 0, v = 0, c = 0;
        for (int s = 0; s < n; ++s)
            m += value(s);
        m /= n;
        for (int s = 0; s < n; ++s)
            v += (value(s) - m) * (value(s) - m);
        for (int s = 1; s < n; ++s)
            c += (value(s) - m) * (value(s - 1) - m);
        return c / v;
    };
    EXPECT_LT(std::abs(lag1([&](int s) { return rot[s]; })), 3.0 / std::sqrt(n));
    EXPECT_LT(std::abs(lag1([&](int s) { return nodes[anchor[s]].x; })), 3.0 / std::sqrt(n));
    double mean = 0;
    for (double r : rot)
        mean += r / n;
    EXPECT_NEAR(mean, std::numbers::pi, 3.0 * 2.0 * std::numbers::pi / std::sqrt(12.0 * n));
    // Same slot, same pose.
    EXPECT_EQ(select_transmitters(5, cfg, nodes, index).nodes, select_transmitters(5, cfg, nodes, index).nodes);
}

TEST(RunSimulation, DestinationWithinOneHop)
{
    auto cfg = dense_square();
    cfg.route_length = 0.3 * square_range();
    const auto res = run_simulation(cfg, 20);
    EXPECT_EQ(res.summary.delivered, 20u);
    for (const auto& p : res.packets) {
        ASSERT_EQ(p.hops.size(), 1u);
        EXPECT_EQ(p.hops.back().x, p.destination.x);
        EXPECT_EQ(p.hops.back().y, p.destination.y);
    }
    EXPECT_DOUBLE_EQ(res.summary.mean_hops, 1.0);
}

TEST(RunSimulation, EveryNoFadingHopPassesSirAudit)
{
    const auto cfg = dense_square();
    const auto res = run_simulation(cfg, 20);
    const auto nodes = simulation_nodes(cfg);
    const NodeIndex index(nodes, node_bucket_size(cfg));
    std::size_t audited = 0;
    for (const auto& p : res.packets) {
        Point2 from = p.source;
        for (std::size_t h = 0; h < p.hops.size(); ++h) {
            const auto tx = select_transmitters(p.hop_slots[h], cfg, nodes, index);
            std::size_t i = tx.points.size();
            for (std::size_t k = 0; k < tx.points.size(); ++k)
                if (tx.points[k].x == from.x && tx.points[k].y == from.y)
                    i = k;
            ASSERT_LT(i, tx.points.size()) << "relay was not transmitting";
            EXPECT_GE(sir(i, p.hops[h], tx.points, cfg.model.alpha), cfg.model.beta);
            for (std::size_t k = 0; k < tx.points.size(); ++k)
                ASSERT_FALSE(tx.points[k].x == p.hops[h].x && tx.points[k].y == p.hops[h].y)
                    << "receiver was transmitting";
            EXPECT_NEAR(p.progress_per_hop[h], progress(from, p.hops[h], p.destination), 1e-12);
            from = p.hops[h];
            ++audited;
        }
    }
    EXPECT_GT(audited, 100u);
}

TEST(RunSimulation, DeliveredProgressCoversRoute)
{
    const auto cfg = dense_square();
    const auto res = run_simulation(cfg, 30);
    const double r = square_range();
    for (const auto& p : res.packets) {
        ASSERT_TRUE(p.delivered);
        double total = 0;
        for (double g : p.progress_per_hop) {
            EXPECT_GT(g, 0.0);
            // Snapping moves transmitters by at most d/10, so a hop can slightly exceed r_lambda.
            EXPECT_LT(g, 1.2 * r);
            total += g;
        }
        EXPECT_GE(total, distance(p.source, p.destination) - r);
        EXPECT_GE(static_cast<double>(p.hops.size()), std::floor(distance(p.source, p.destination) / (1.2 * r)));
    }
}

TEST(RunSimulation, DeterministicPerSeed)
{
    auto cfg = dense_square();
    cfg.model.fading = Fading::exponential();
    const auto a = run_simulation(cfg, 10);
    const auto b = run_simulation(cfg, 10);
    ASSERT_EQ(a.packets.size(), b.packets.size());
    for (std::size_t k = 0; k < a.packets.size(); ++k) {
        EXPECT_EQ(a.packets[k].hop_slots, b.packets[k].hop_slots);
        EXPECT_EQ(a.packets[k].progress_per_hop, b.packets[k].progress_per_hop);
    }
    EXPECT_EQ(a.summary.slots_to_delivery, b.summary.slots_to_delivery);
    cfg.seed = 8;
    const auto c = run_simulation(cfg, 10);
    EXPECT_NE(a.summary.slots_to_delivery, c.summary.slots_to_delivery);
}

TEST(RunSimulation, RaisingBetaNeverHelpsDelivery)
{
    // Per slot the receiving set shrinks as beta grows, but paths diverge and
    // a node's chance of being scheduled depends on its neighbourhood, so the
    // comparison is on the aggregate fraction with a budget near the median
    // delivery time.
    auto cfg = dense_square();
    cfg.slots = 600;
    double prev = 2.0;
    for (double beta : {2.0, 10.0, 50.0}) {
        cfg.model.beta = beta;
        const double f = run_simulation(cfg, 200).summary.delivery_fraction;
        EXPECT_LE(f, prev) << beta;
        prev = f;
    }
}

TEST(RunSimulation, ProgressApproachesRangeAsNodesDensify)
{
    const double r = square_range();
    const auto sparse = run_simulation(dense_square(100.0), 40).summary;
    const auto dense = run_simulation(dense_square(400.0), 40).summary;
    EXPECT_GT(sparse.mean_progress_relay, 0.8 * r);
    EXPECT_GT(dense.mean_progress_relay, sparse.mean_progress_relay);
    EXPECT_LT(dense.mean_hops, sparse.mean_hops);
    EXPECT_GE(dense.mean_hops, std::ceil(dense_square().route_length / (1.2 * r)));
}

TEST(RunSimulation, ExponentialFadingSelectsLuckyFarRelays)
{
    // Receivers succeed independently, so the farthest lucky node is often
    // beyond the no-fading range: hops get longer, not shorter.
    auto cfg = dense_square();
    const auto plain = run_simulation(cfg, 40).summary;
    cfg.model.fading = Fading::exponential();
    const auto faded = run_simulation(cfg, 40).summary;
    EXPECT_EQ(faded.delivered, 40u);
    EXPECT_GT(faded.mean_progress_relay, plain.mean_progress_relay);
    EXPECT_LT(faded.mean_hops, plain.mean_hops);
}

TEST(RunSimulation, AlohaSchemeDelivers)
{
    SimConfig cfg;
    cfg.scheme = MacScheme::aloha(grid_density(square25));
    cfg.node_density = 50.0 * cfg.scheme.lambda;
    cfg.model = {4.0, 10.0, {}};
    cfg.extent = Extent{250.0};
    cfg.route_length = 40.0;
    cfg.slots = 20'000;
    const auto res = run_simulation(cfg, 10);
    EXPECT_EQ(res.summary.delivered, 10u);
    EXPECT_EQ(res.summary.max_unmatched_fraction, 0.0);
    for (const auto& p : res.packets)
        for (double g : p.progress_per_hop)
            EXPECT_GT(g, 0.0);
}

TEST(RunSimulation, UndeliveredReportedNotThrown)
{
    auto cfg = dense_square();
    cfg.slots = 2;
    const auto res = run_simulation(cfg, 5);
    EXPECT_LT(res.summary.delivered, 5u);
    EXPECT_NE(res.summary.warnings.back().find("undelivered"), std::string::npos);
}

TEST(SimConfig, Validation)
{
    auto cfg = dense_square();
    cfg.model.fading = Fading::log_uniform(1.0);
    EXPECT_THROW(run_simulation(cfg, 1), unsupported_model_error);
    cfg = dense_square();
    cfg.snap_radius = 7.0;
    EXPECT_THROW(run_simulation(cfg, 1), invalid_argument_error);
    cfg = dense_square();
    cfg.node_density = 0.5 * grid_density(square25);
    EXPECT_THROW(run_simulation(cfg, 1), invalid_argument_error);
    cfg = dense_square();
    cfg.route_length = 300.0;
    EXPECT_THROW(run_simulation(cfg, 1), invalid_argument_error);
    EXPECT_THROW(run_simulation(dense_square(), 0), invalid_argument_error);
}
