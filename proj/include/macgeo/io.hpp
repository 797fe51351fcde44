#pragma once

#include "aloha.hpp"
#include "asymptotics.hpp"
#include "errors.hpp"
#include "multihop.hpp"
#include "propagation.hpp"
#include "reception.hpp"
#include "spatial.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace macgeo::io {

using json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double; "inf", "-inf", "nan" otherwise.
inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

/// Non-finite values become strings, JSON having no literal for them.
inline json number(double v)
{
    if (std::isfinite(v))
        return v;
    return format_double(v);
}

/// Comma-separated rows after a fixed header.  Fields are written verbatim;
/// none of the emitted schemas carries commas or quotes.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, std::initializer_list<std::string_view> header) : os_(os), columns_(header.size())
    {
        bool first = true;
        for (auto h : header) {
            if (!first)
                os_ << ',';
            os_ << h;
            first = false;
        }
        os_ << '\n';
    }

    CsvWriter& operator<<(double v) { return field(format_double(v)); }
    CsvWriter& operator<<(std::size_t v) { return field(std::to_string(v)); }
    CsvWriter& operator<<(int v) { return field(std::to_string(v)); }
    CsvWriter& operator<<(std::string_view v) { return field(std::string(v)); }
    CsvWriter& operator<<(const char* v) { return field(v); }

private:
    CsvWriter& field(const std::string& text)
    {
        if (col_ > 0)
            os_ << ',';
        os_ << text;
        if (++col_ == columns_) {
            os_ << '\n';
            col_ = 0;
        }
        return *this;
    }

    std::ostream& os_;
    std::size_t columns_;
    std::size_t col_ = 0;
};

/// Opens `path` for writing, creating parent directories.
inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw output_error("cannot write " + path.string());
    return os;
}

inline void finish(std::ofstream& os, const std::filesystem::path& path)
{
    os.flush();
    if (!os)
        throw output_error("write failed for " + path.string());
}

inline void write_json(std::ostream& os, const json& j)
{
    os << j.dump(2) << '\n';
}

// Point sets

inline void write_points_csv(std::ostream& os, const PointSet& ps)
{
    CsvWriter csv(os, {"x", "y"});
    for (std::size_t k = 0; k < ps.size(); ++k)
        csv << ps[k].x << ps[k].y;
}

inline json points_sidecar(const PointSet& ps)
{
    json j;
    if (const auto& g = ps.grid()) {
        j["kind"] = to_string(g->kind);
        j["d"] = g->d;
        j["k1"] = g->k1;
        j["k2"] = g->k2;
        j["rotation"] = g->rotation;
        j["translation"] = {g->translation.x, g->translation.y};
    } else {
        j["kind"] = "poisson";
    }
    j["density"] = ps.density();
    j["extent"] = ps.extent();
    j["points"] = ps.size();
    if (ps.seed())
        j["seed"] = *ps.seed();
    return j;
}

// Fields and reception areas

inline void write_field_csv(std::ostream& os, const std::vector<FieldPoint>& pts)
{
    CsvWriter csv(os, {"x", "y", "value"});
    for (const auto& p : pts)
        csv << p.x << p.y << p.value;
}

inline void write_trace_csv(std::ostream& os, const ContourTrace& trace)
{
    CsvWriter csv(os, {"x", "y"});
    for (auto v : trace.vertices)
        csv << v.x << v.y;
}

inline json trace_sidecar(const RangeResult& res, const GridSpec& spec, const ChannelModel& model)
{
    json j;
    j["pattern"] = to_string(spec.kind);
    j["d"] = spec.d;
    j["k1"] = spec.k1;
    j["k2"] = spec.k2;
    j["beta"] = model.beta;
    j["alpha"] = model.alpha;
    j["lambda"] = res.lambda;
    j["extent"] = res.extent;
    j["r_lambda"] = res.r_lambda;
    j["r1"] = res.r1;
    j["max_range_point"] = {res.trace.max_range_point.x, res.trace.max_range_point.y};
    j["dt"] = res.trace.dt;
    j["steps"] = res.trace.steps;
    j["closed"] = res.trace.closed;
    j["vertices"] = res.trace.vertices.size();
    if (res.truncation_change)
        j["truncation_change"] = *res.truncation_change;
    return j;
}

inline void write_membership_csv(std::ostream& os, const std::vector<MembershipPoint>& pts)
{
    CsvWriter csv(os, {"x", "y", "member"});
    for (const auto& p : pts)
        csv << p.x << p.y << (p.member ? 1 : 0);
}

// ALOHA

struct CurveRow {
    AlohaResult result;
    Fading fading;
};

inline void write_curve_csv(std::ostream& os, const std::vector<CurveRow>& rows)
{
    CsvWriter csv(os, {"r", "p", "rp", "method", "fading"});
    for (const auto& row : rows)
        csv << row.result.r << row.result.p << row.result.rp << to_string(row.result.method) << to_string(row.fading);
}

inline json optimizer_json(const AlohaResult& opt, const SeriesParams& params, const Fading& fading)
{
    json j;
    j["beta"] = params.beta;
    j["alpha"] = params.alpha;
    j["lambda"] = params.lambda;
    j["fading"] = to_string(fading);
    j["r_opt"] = opt.r;
    j["r1"] = normalized_range(opt.r, params.lambda);
    j["p_at_opt"] = opt.p;
    j["rp"] = opt.rp;
    j["inv_rp"] = number(opt.inv_rp);
    j["method"] = to_string(opt.method);
    return j;
}

// Asymptotic tables

inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows)
{
    CsvWriter csv(os, {"pattern", "k1_over_k2", "value"});
    for (const auto& row : rows)
        csv << to_string(row.pattern) << row.k1_over_k2 << row.value;
}

// Multihop

inline void write_hop_log_csv(std::ostream& os, const SimResult& res)
{
    CsvWriter csv(os, {"packet_id", "slot", "hop", "from_x", "from_y", "to_x", "to_y", "progress"});
    for (std::size_t id = 0; id < res.packets.size(); ++id) {
        const auto& p = res.packets[id];
        Point2 from = p.source;
        for (std::size_t h = 0; h < p.hops.size(); ++h) {
            csv << id << p.hop_slots[h] << h + 1 << from.x << from.y << p.hops[h].x << p.hops[h].y
                << p.progress_per_hop[h];
            from = p.hops[h];
        }
    }
}

inline json simulation_summary(const SimResult& res, const SimConfig& cfg)
{
    const auto& s = res.summary;
    json j;
    j["scheme"] = cfg.scheme.kind == SchemeKind::aloha ? "aloha" : std::string(to_string(cfg.scheme.grid.kind));
    j["transmitter_density"] = cfg.scheme.density();
    j["node_density"] = cfg.node_density;
    j["beta"] = cfg.model.beta;
    j["alpha"] = cfg.model.alpha;
    j["fading"] = to_string(cfg.model.fading);
    j["route_length"] = cfg.route_length;
    j["seed"] = cfg.seed;
    j["nodes"] = s.nodes;
    j["packets"] = s.packets;
    j["delivered"] = s.delivered;
    j["delivery_fraction"] = s.delivery_fraction;
    j["mean_hops"] = s.mean_hops;
    j["mean_progress"] = s.mean_progress;
    j["mean_progress_relay"] = s.mean_progress_relay;
    j["slots_run"] = s.slots_run;
    j["slots_to_delivery"] = s.slots_to_delivery;
    j["max_unmatched_fraction"] = s.max_unmatched_fraction;
    j["warnings"] = s.warnings;
    return j;
}

} // namespace macgeo::io
