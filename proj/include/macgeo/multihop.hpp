#pragma once

#include "errors.hpp"
#include "geometry.hpp"
#include "propagation.hpp"
#include "spatial.hpp"
#include "detail/rng.hpp"

#include <boost/random/uniform_int_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace macgeo {

enum class SchemeKind { aloha, grid };

/// MAC scheme choosing each slot's transmitters.
struct MacScheme {
    SchemeKind kind = SchemeKind::grid;
    /// Transmitter density for ALOHA.
    double lambda = 0.0;
    GridSpec grid = GridSpec::square(25.0);

    static MacScheme aloha(double lambda) { return {SchemeKind::aloha, lambda, {}}; }
    static MacScheme grid_pattern(const GridSpec& spec) { return {SchemeKind::grid, 0.0, spec}; }

    [[nodiscard]] double density() const { return kind == SchemeKind::aloha ? lambda : grid_density(grid); }

    void validate() const
    {
        if (kind == SchemeKind::aloha)
            detail::require(std::isfinite(lambda) && lambda > 0.0, "ALOHA density lambda must be positive");
        else
            grid.validate();
    }
};

struct SimConfig {
    /// Node density nu.
    double node_density = 0.16;
    Extent extent{300.0};
    MacScheme scheme{};
    ChannelModel model{};
    /// 0 selects d/10.
    double snap_radius = 0.0;
    std::size_t slots = 2000;
    std::uint64_t seed = 1;
    /// Source-destination distance L of every tracked packet.
    double route_length = 100.0;
    /// Receivers are searched within this distance of the holder; 0 selects
    /// an automatic radius (see effective_relay_radius).
    double relay_radius = 0.0;

    [[nodiscard]] double effective_snap_radius() const
    {
        return snap_radius > 0.0 ? snap_radius : scheme.grid.d / 10.0;
    }

    void validate() const
    {
        scheme.validate();
        model.validate();
        extent.validate();
        detail::require(std::isfinite(node_density) && node_density >= scheme.density(),
                        "node density must be at least the transmitter density");
        if (model.fading.kind == FadingKind::log_uniform)
            throw unsupported_model_error("relaying supports no fading or exponential fading");
        if (scheme.kind == SchemeKind::grid) {
            const double spacing = std::min(1.0, scheme.grid.k1) * scheme.grid.d;
            detail::require(std::isfinite(snap_radius) && snap_radius >= 0.0 &&
                                effective_snap_radius() < spacing / 4.0,
                            "snap radius must be below a quarter of the grid spacing");
        }
        detail::require(slots >= 1, "at least one slot required");
        detail::require(std::isfinite(route_length) && route_length > 0.0 &&
                            route_length < extent.half_width,
                        "route length must be positive and below the extent half-width");
        detail::require(std::isfinite(relay_radius) && relay_radius >= 0.0, "relay radius must be non-negative");
    }
};

/// Projection of rx - tx onto the unit vector from tx towards dest.
inline double progress(Point2 tx, Point2 rx, Point2 dest)
{
    const Vector2 u = dest - tx;
    const double n = u.norm();
    detail::require(n > 0.0, "progress needs tx != dest");
    return dot(rx - tx, u) / n;
}

/// Uniform bucket index over a node population.
class NodeIndex {
public:
    NodeIndex(const PointSet& nodes, double cell) : nodes_(&nodes), cell_(cell)
    {
        detail::require(cell > 0.0, "bucket size must be positive");
        const double E = nodes.extent();
        origin_ = -E;
        side_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(2.0 * E / cell)));
        start_.assign(side_ * side_ + 1, 0);
        std::vector<std::size_t> bucket(nodes.size());
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            bucket[k] = flat(nodes[k]);
            ++start_[bucket[k] + 1];
        }
        for (std::size_t b = 0; b < side_ * side_; ++b)
            start_[b + 1] += start_[b];
        items_.resize(nodes.size());
        auto fill = start_;
        for (std::size_t k = 0; k < nodes.size(); ++k)
            items_[fill[bucket[k]]++] = k;
    }

    /// Calls f(k, squared distance) for every node within r of p, in index order per bucket.
    template <class F>
    void for_each_within(Point2 p, double r, F&& f) const
    {
        const auto [c0, r0] = coords(p.x - r, p.y - r);
        const auto [c1, r1] = coords(p.x + r, p.y + r);
        const double r2 = r * r;
        for (std::size_t row = r0; row <= r1; ++row) {
            for (std::size_t col = c0; col <= c1; ++col) {
                const std::size_t b = row * side_ + col;
                for (std::size_t s = start_[b]; s < start_[b + 1]; ++s) {
                    const std::size_t k = items_[s];
                    const double d2 = ((*nodes_)[k] - p).norm2();
                    if (d2 <= r2)
                        f(k, d2);
                }
            }
        }
    }

    /// Nearest node within r of p (smallest index on ties).
    [[nodiscard]] std::optional<std::size_t> nearest_within(Point2 p, double r) const
    {
        std::optional<std::size_t> best;
        double best_d2 = std::numeric_limits<double>::infinity();
        for_each_within(p, r, [&](std::size_t k, double d2) {
            if (d2 < best_d2 || (d2 == best_d2 && k < *best)) {
                best = k;
                best_d2 = d2;
            }
        });
        return best;
    }

private:
    [[nodiscard]] std::pair<std::size_t, std::size_t> coords(double x, double y) const
    {
        auto clampi = [&](double v) {
            const double c = std::floor((v - origin_) / cell_);
            return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(side_ - 1)));
        };
        return {clampi(x), clampi(y)};
    }
    [[nodiscard]] std::size_t flat(Point2 p) const
    {
        const auto [c, r] = coords(p.x, p.y);
        return r * side_ + c;
    }

    const PointSet* nodes_;
    double cell_;
    double origin_ = 0.0;
    std::size_t side_ = 1;
    std::vector<std::size_t> start_;
    std::vector<std::size_t> items_;
};

/// Transmitters of one slot.
struct SlotTransmitters {
    /// Node indices, ascending.
    std::vector<std::size_t> nodes;
    PointSet points;
    std::size_t virtual_points = 0;
    std::size_t unmatched = 0;
    /// Grid pose (grid scheme only).
    std::size_t anchor = 0;
    double rotation = 0.0;

    [[nodiscard]] double unmatched_fraction() const
    {
        return virtual_points ? static_cast<double>(unmatched) / static_cast<double>(virtual_points) : 0.0;
    }
};

namespace detail {

inline constexpr std::uint64_t packet_stream = 1;

inline std::uint64_t selection_stream(std::size_t slot) { return 2 + 2 * static_cast<std::uint64_t>(slot); }
inline std::uint64_t relay_stream(std::size_t slot) { return 3 + 2 * static_cast<std::uint64_t>(slot); }

} // namespace detail

/// Transmitter set for `slot`; depends only on (seed, slot) and the node population.
///
/// Grid scheme: a virtual grid through a random node at a random rotation,
/// each virtual point snapped to the nearest node within the snap radius.
/// ALOHA: every node transmits independently with probability lambda / nu.
inline SlotTransmitters select_transmitters(std::size_t slot, const SimConfig& cfg, const PointSet& nodes,
                                            const NodeIndex& index)
{
    detail::require(!nodes.empty(), "empty node population");
    auto eng = detail::make_engine(cfg.seed, detail::selection_stream(slot));
    SlotTransmitters out;
    if (cfg.scheme.kind == SchemeKind::aloha) {
        const double q = cfg.scheme.lambda / cfg.node_density;
        for (std::size_t k = 0; k < nodes.size(); ++k)
            if (detail::uniform01(eng) <= q)
                out.nodes.push_back(k);
    } else {
        boost::random::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
        out.anchor = pick(eng);
        out.rotation = detail::uniform(eng, 0.0, 2.0 * std::numbers::pi);
        GridSpec pose = cfg.scheme.grid;
        pose.rotation = out.rotation;
        pose.translation = nodes[out.anchor];
        const PointSet virt = gen_grid(pose, Extent{nodes.extent()});
        const double snap = cfg.effective_snap_radius();
        out.virtual_points = virt.size();
        for (std::size_t v = 0; v < virt.size(); ++v) {
            if (const auto k = index.nearest_within(virt[v], snap))
                out.nodes.push_back(*k);
            else
                ++out.unmatched;
        }
        std::sort(out.nodes.begin(), out.nodes.end());
        out.nodes.erase(std::unique(out.nodes.begin(), out.nodes.end()), out.nodes.end());
    }
    std::vector<double> xs, ys;
    xs.reserve(out.nodes.size());
    ys.reserve(out.nodes.size());
    for (auto k : out.nodes) {
        xs.push_back(nodes[k].x);
        ys.push_back(nodes[k].y);
    }
    out.points = PointSet(std::move(xs), std::move(ys), cfg.scheme.density(), nodes.extent());
    return out;
}

struct PacketRecord {
    std::size_t source_node = 0;
    std::size_t destination_node = 0;
    Point2 source;
    Point2 destination;
    /// Relay positions after each hop; the last one is the destination when delivered.
    std::vector<Point2> hops;
    std::vector<std::size_t> hop_slots;
    std::vector<double> progress_per_hop;
    bool delivered = false;
    std::size_t holder = 0;
};

/// Receiver search radius around a transmitter whose nearest other transmitter is at D.
///
/// Without fading and beta > 1, SIR >= beta forces r^-alpha >= beta (r + D)^-alpha,
/// i.e. r <= D / (beta^(1/alpha) - 1), so the search is exhaustive.  Otherwise 3 D.
inline double effective_relay_radius(const SimConfig& cfg, double D)
{
    if (cfg.relay_radius > 0.0)
        return cfg.relay_radius;
    const double b = std::pow(cfg.model.beta, 1.0 / cfg.model.alpha);
    if (cfg.model.fading.kind == FadingKind::none && b > 1.0)
        return std::min(D / (b - 1.0), 2.0 * cfg.extent.half_width);
    return 3.0 * D;
}

/// Reception of the slot's transmitter `t` at rx: the Heaviside indicator
/// without fading, the exact product probability with exponential fading.
inline double reception_probability(std::size_t t, Point2 rx, const PointSet& tx, const ChannelModel& model)
{
    const Point2 zi = tx[t];
    const double ri2 = (rx - zi).norm2();
    const auto xs = tx.xs();
    const auto ys = tx.ys();
    const detail::NegPow negpow(model.alpha);
    if (model.fading.kind == FadingKind::none) {
        double w = 0.0;
        for (std::size_t j = 0; j < tx.size(); ++j) {
            if (j == t)
                continue;
            const double dx = rx.x - xs[j], dy = rx.y - ys[j];
            w += negpow(dx * dx + dy * dy);
        }
        return negpow(ri2) / model.beta >= w ? 1.0 : 0.0;
    }
    double log_p = 0.0;
    for (std::size_t j = 0; j < tx.size(); ++j) {
        if (j == t)
            continue;
        const double dx = rx.x - xs[j], dy = rx.y - ys[j];
        log_p -= std::log1p(model.beta * negpow((dx * dx + dy * dy) / ri2));
    }
    return std::exp(log_p);
}

/// Same decision as u <= reception_probability(...) with exponential fading,
/// stopping as soon as the partial product drops below u.
inline bool fading_reception(std::size_t t, Point2 rx, const PointSet& tx, const ChannelModel& model, double u)
{
    const double ri2 = (rx - tx[t]).norm2();
    const detail::NegPow negpow(model.alpha);
    const auto xs = tx.xs();
    const auto ys = tx.ys();
    double prod = 1.0;
    for (std::size_t j = 0; j < tx.size(); ++j) {
        if (j == t)
            continue;
        const double dx = rx.x - xs[j], dy = rx.y - ys[j];
        prod /= 1.0 + model.beta * negpow((dx * dx + dy * dy) / ri2);
        if (prod < u)
            return false;
    }
    return true;
}

/// One slot of greedy forwarding for a packet.
///
/// No-op unless the holder transmits this slot.  Receivers are the nodes that
/// are not transmitting; the destination is taken whenever it receives,
/// otherwise the receiving node of largest positive progress (ties to the one
/// closer to the destination).  Candidates are tried in decreasing progress
/// order and drawn lazily, which selects the same node as drawing all of them.
/// Returns true if the packet moved.
inline bool relay_step(PacketRecord& packet, std::size_t slot, const SlotTransmitters& slot_tx, const SimConfig& cfg,
                       const PointSet& nodes, const NodeIndex& index, detail::Engine& eng)
{
    if (packet.delivered)
        return false;
    const auto it = std::lower_bound(slot_tx.nodes.begin(), slot_tx.nodes.end(), packet.holder);
    if (it == slot_tx.nodes.end() || *it != packet.holder || slot_tx.nodes.size() < 2)
        return false;
    const auto t = static_cast<std::size_t>(it - slot_tx.nodes.begin());
    const PointSet& tx = slot_tx.points;
    const Point2 from = tx[t];

    double D2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tx.size(); ++j)
        if (j != t)
            D2 = std::min(D2, (tx[j] - from).norm2());
    const double radius = effective_relay_radius(cfg, std::sqrt(D2));

    auto is_transmitting = [&](std::size_t k) {
        return std::binary_search(slot_tx.nodes.begin(), slot_tx.nodes.end(), k);
    };
    auto receives = [&](std::size_t k) {
        if (cfg.model.fading.kind == FadingKind::none)
            return reception_probability(t, nodes[k], tx, cfg.model) >= 1.0;
        return fading_reception(t, nodes[k], tx, cfg.model, detail::uniform01(eng));
    };
    auto move_to = [&](std::size_t k, double prog) {
        packet.holder = k;
        packet.hops.push_back(nodes[k]);
        packet.hop_slots.push_back(slot);
        packet.progress_per_hop.push_back(prog);
    };

    const Point2 dest = packet.destination;
    const double dest_dist = (dest - from).norm();
    if (dest_dist <= radius && !is_transmitting(packet.destination_node) && receives(packet.destination_node)) {
        move_to(packet.destination_node, dest_dist);
        packet.delivered = true;
        return true;
    }

    struct Candidate {
        double progress;
        double to_dest2;
        std::size_t node;
    };
    std::vector<Candidate> cands;
    index.for_each_within(from, radius, [&](std::size_t k, double) {
        if (k == packet.holder || k == packet.destination_node || is_transmitting(k))
            return;
        const double p = progress(from, nodes[k], dest);
        if (p > 0.0)
            cands.push_back({p, (dest - nodes[k]).norm2(), k});
    });
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.progress != b.progress)
            return a.progress > b.progress;
        if (a.to_dest2 != b.to_dest2)
            return a.to_dest2 < b.to_dest2;
        return a.node < b.node;
    });
    for (const auto& c : cands) {
        if (receives(c.node)) {
            move_to(c.node, c.progress);
            return true;
        }
    }
    return false;
}

struct SimSummary {
    std::size_t packets = 0;
    std::size_t delivered = 0;
    double delivery_fraction = 0.0;
    /// Over delivered packets.
    double mean_hops = 0.0;
    /// Over every hop taken.
    double mean_progress = 0.0;
    /// Over hops other than the delivering one.
    double mean_progress_relay = 0.0;
    /// Slot of delivery (1-based count of slots used) per delivered packet.
    std::vector<std::size_t> slots_to_delivery;
    std::size_t slots_run = 0;
    std::size_t nodes = 0;
    double max_unmatched_fraction = 0.0;
    std::vector<std::string> warnings;
};

struct SimResult {
    std::vector<PacketRecord> packets;
    SimSummary summary;
};

namespace detail {

inline std::vector<PacketRecord> place_packets(const SimConfig& cfg, const PointSet& nodes, std::size_t n_packets)
{
    auto eng = make_engine(cfg.seed, packet_stream);
    const double L = cfg.route_length;
    const double spread = std::max(0.0, nodes.extent() / 2.0 - L / 2.0);
    std::vector<PacketRecord> out;
    out.reserve(n_packets);
    while (out.size() < n_packets) {
        const double rho = spread * std::sqrt(uniform01(eng));
        const double phi = uniform(eng, 0.0, 2.0 * std::numbers::pi);
        const double theta = uniform(eng, 0.0, 2.0 * std::numbers::pi);
        const Point2 c{rho * std::cos(phi), rho * std::sin(phi)};
        const Vector2 half{0.5 * L * std::cos(theta), 0.5 * L * std::sin(theta)};
        PacketRecord rec;
        rec.source_node = nodes.nearest(c - half);
        rec.destination_node = nodes.nearest(c + half);
        if (rec.source_node == rec.destination_node)
            continue;
        rec.source = nodes[rec.source_node];
        rec.destination = nodes[rec.destination_node];
        rec.holder = rec.source_node;
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace detail

/// Node population for a configuration (deterministic per seed).
inline PointSet simulation_nodes(const SimConfig& cfg)
{
    return gen_poisson(cfg.node_density, cfg.extent, detail::derive_seed(cfg.seed, 0));
}

inline double node_bucket_size(const SimConfig& cfg)
{
    return std::max(cfg.effective_snap_radius(), 2.0 / std::sqrt(cfg.node_density));
}

/// Runs up to cfg.slots slots (stopping once every packet is delivered).
inline SimResult run_simulation(const SimConfig& cfg, std::size_t n_packets)
{
    cfg.validate();
    detail::require(n_packets >= 1, "at least one packet required");
    const PointSet nodes = simulation_nodes(cfg);
    detail::require(nodes.size() >= 2, "node population too small");
    const NodeIndex index(nodes, node_bucket_size(cfg));

    SimResult res;
    res.packets = detail::place_packets(cfg, nodes, n_packets);
    auto& sum = res.summary;
    sum.packets = n_packets;
    sum.nodes = nodes.size();
    std::size_t warned_slots = 0;
    std::size_t remaining = n_packets;
    for (std::size_t slot = 0; slot < cfg.slots && remaining > 0; ++slot) {
        const auto slot_tx = select_transmitters(slot, cfg, nodes, index);
        sum.max_unmatched_fraction = std::max(sum.max_unmatched_fraction, slot_tx.unmatched_fraction());
        if (slot_tx.unmatched_fraction() > 0.1)
            ++warned_slots;
        auto eng = detail::make_engine(cfg.seed, detail::relay_stream(slot));
        for (auto& p : res.packets) {
            if (relay_step(p, slot, slot_tx, cfg, nodes, index, eng) && p.delivered) {
                sum.slots_to_delivery.push_back(slot + 1);
                --remaining;
            }
        }
        sum.slots_run = slot + 1;
    }
    if (warned_slots > 0)
        sum.warnings.push_back("more than 10% of virtual grid points unmatched in " + std::to_string(warned_slots) +
                               " slot(s); node density too low for the snap radius");
    if (remaining > 0)
        sum.warnings.push_back(std::to_string(remaining) + " packet(s) undelivered within the slot budget");

    std::size_t hops = 0, relay_hops = 0;
    double prog = 0.0, relay_prog = 0.0, delivered_hops = 0.0;
    for (const auto& p : res.packets) {
        for (std::size_t h = 0; h < p.progress_per_hop.size(); ++h) {
            prog += p.progress_per_hop[h];
            ++hops;
            if (!(p.delivered && h + 1 == p.progress_per_hop.size())) {
                relay_prog += p.progress_per_hop[h];
                ++relay_hops;
            }
        }
        if (p.delivered) {
            ++sum.delivered;
            delivered_hops += static_cast<double>(p.hops.size());
        }
    }
    sum.delivery_fraction = static_cast<double>(sum.delivered) / static_cast<double>(n_packets);
    sum.mean_hops = sum.delivered ? delivered_hops / static_cast<double>(sum.delivered) : 0.0;
    sum.mean_progress = hops ? prog / static_cast<double>(hops) : 0.0;
    sum.mean_progress_relay = relay_hops ? relay_prog / static_cast<double>(relay_hops) : 0.0;
    return res;
}

} // namespace macgeo
