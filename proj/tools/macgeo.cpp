#include <macgeo/aloha.hpp>
#include <macgeo/asymptotics.hpp>
#include <macgeo/io.hpp>
#include <macgeo/multihop.hpp>
#include <macgeo/propagation.hpp>
#include <macgeo/reception.hpp>
#include <macgeo/spatial.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace macgeo;
using io::json;

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_unknown_command = 2,
    exit_invalid_parameter = 3,
    exit_unwritable = 4,
    exit_module_error = 5,
};

struct Params {
    std::string command;
    double beta = 10.0;
    double alpha = 4.0;
    std::string pattern = "square";
    double k1 = 1.0;
    double k2 = 1.0;
    double d = 25.0;
    double extent = 5000.0;
    bool extent_given = false;
    double lambda = 1.0;
    bool lambda_given = false;
    std::string fading = "none";
    std::size_t trials = 0;
    std::uint64_t seed = 1;
    std::string out;
    std::string format;
    std::string sweep;
    std::string values;
    bool values_given = false;

    double r_min = 0.0;
    double r_max = 0.0;
    std::size_t points = 0;
    double truncation = 400.0;
    int richardson = 0;
    double verify_alpha = 0.0;
    bool check_truncation = false;
    std::string quantity = "sir";
    double half = 0.0;
    bool db = false;
    double angle = std::numbers::pi / 4.0;
    double span = 0.0;
    std::string scheme = "grid";
    double nu_ratio = 100.0;
    std::size_t packets = 100;
    std::size_t slots = 20000;
    double route = 0.0;
    double snap = 0.0;
};

struct CommandOutput {
    std::vector<json> rows;
    std::optional<json> sidecar;
    std::string summary;
};

GridSpec grid_of(const Params& p)
{
    const auto kind = parse_pattern(p.pattern);
    GridSpec spec{kind, p.d, 1.0, 1.0};
    if (spec.has_aspect()) {
        spec.k1 = p.k1;
        spec.k2 = p.k2;
    } else {
        detail::require(p.k1 == 1.0 && p.k2 == 1.0, "--k1/--k2 apply to rectangular and linear patterns only");
    }
    spec.validate();
    return spec;
}

ChannelModel model_of(const Params& p)
{
    ChannelModel m{p.alpha, p.beta, parse_fading(p.fading)};
    m.validate();
    return m;
}

SeriesParams series_of(const Params& p)
{
    SeriesParams sp;
    sp.lambda = p.lambda;
    sp.beta = p.beta;
    sp.alpha = p.alpha;
    sp.validate();
    return sp;
}

std::string fmt(double v)
{
    return io::format_double(v);
}

// Commands

CommandOutput cmd_grid_range(const Params& p)
{
    const auto spec = grid_of(p);
    auto model = model_of(p);
    detail::require(model.fading.kind == FadingKind::none, "grid-range traces the no-fading reception area");
    const auto r = grid_range(spec, Extent{p.extent}, model, {}, p.check_truncation);
    json row;
    row["pattern"] = to_string(spec.kind);
    row["k1"] = spec.k1;
    row["k2"] = spec.k2;
    row["d"] = spec.d;
    row["beta"] = p.beta;
    row["alpha"] = p.alpha;
    row["extent"] = r.extent;
    row["lambda"] = r.lambda;
    row["r_lambda"] = r.r_lambda;
    row["r1"] = r.r1;
    if (p.check_truncation)
        row["truncation_change"] = io::number(r.truncation_change.value_or(0.0));
    return {{row}, std::nullopt, "r1=" + fmt(r.r1)};
}

CommandOutput cmd_aloha_curve(const Params& p)
{
    const auto sp = series_of(p);
    const Fading given = parse_fading(p.fading);
    std::vector<Fading> fadings{Fading::none()};
    if (given.kind != FadingKind::none)
        fadings.push_back(given);
    const double unit = 1.0 / std::sqrt(p.lambda);
    const double r_max = p.r_max > 0.0 ? p.r_max : 0.6 * unit;
    const std::size_t n = p.points ? p.points : 150;
    const double r_min = p.r_min > 0.0 ? p.r_min : r_max / static_cast<double>(n);
    detail::require(n >= 2 && r_min > 0.0 && r_max > r_min, "need 0 < r-min < r-max and at least 2 points");
    CommandOutput out;
    for (const auto& f : fadings) {
        for (std::size_t k = 0; k < n; ++k) {
            const double r = r_min + (r_max - r_min) * static_cast<double>(k) / static_cast<double>(n - 1);
            const auto res = aloha_success(r, sp, f);
            json row;
            row["r"] = res.r;
            row["p"] = res.p;
            row["rp"] = res.rp;
            row["method"] = to_string(res.method);
            row["fading"] = to_string(f);
            out.rows.push_back(std::move(row));
        }
    }
    out.summary = std::to_string(fadings.size()) + " curve(s) of " + std::to_string(n) + " points";
    return out;
}

CommandOutput cmd_optimize(const Params& p)
{
    const auto sp = series_of(p);
    const Fading f = parse_fading(p.fading);
    const auto opt = optimize_range(sp, f);
    return {{io::optimizer_json(opt, sp, f)}, std::nullopt, "r1=" + fmt(normalized_range(opt.r, sp.lambda)) +
                                                                " p=" + fmt(opt.p)};
}

CommandOutput cmd_asympt_beta(const Params& p)
{
    CommandOutput out;
    for (const auto& row : beta_inf_table(p.alpha, p.truncation, p.richardson)) {
        json j;
        j["pattern"] = to_string(row.pattern);
        j["k1_over_k2"] = row.k1_over_k2;
        j["value"] = row.value;
        out.rows.push_back(std::move(j));
    }
    out.summary = "beta -> infinity table at alpha=" + fmt(p.alpha);
    return out;
}

CommandOutput cmd_asympt_alpha(const Params& p)
{
    CommandOutput out;
    for (const auto& spec : table_patterns()) {
        json j;
        j["pattern"] = to_string(spec.kind);
        j["k1_over_k2"] = spec.k1 / spec.k2;
        j["value"] = alpha_inf_range(spec);
        if (p.verify_alpha > 0.0) {
            GridSpec scaled = spec;
            scaled.d = p.d;
            const auto dev = voronoi_limit_check(scaled, p.verify_alpha);
            j["traced"] = dev.traced;
            j["deviation"] = dev.relative;
        }
        out.rows.push_back(std::move(j));
    }
    out.summary = "alpha -> infinity table";
    return out;
}

CommandOutput cmd_trace(const Params& p)
{
    const auto spec = grid_of(p);
    const auto model = model_of(p);
    detail::require(model.fading.kind == FadingKind::none, "trace follows the no-fading reception boundary");
    const auto r = grid_range(spec, Extent{p.extent}, model, {}, p.check_truncation);
    CommandOutput out;
    for (auto v : r.trace.vertices) {
        json j;
        j["x"] = v.x;
        j["y"] = v.y;
        out.rows.push_back(std::move(j));
    }
    out.sidecar = io::trace_sidecar(r, spec, model);
    out.summary = "r1=" + fmt(r.r1) + ", " + std::to_string(r.trace.vertices.size()) + " vertices";
    return out;
}

CommandOutput cmd_fading_curve(const Params& p)
{
    const auto spec = grid_of(p);
    ChannelModel model = model_of(p);
    model.fading = Fading::exponential();
    const auto S = gen_grid(spec, Extent{p.extent});
    const std::size_t o = origin_index(S, 1e-9 * spec.d);
    detail::require(o < S.size(), "grid has no transmitter at the origin");
    const double span = p.span > 0.0 ? p.span : spec.d * std::numbers::sqrt2;
    const std::size_t n = p.points ? p.points : 10;
    const ChannelModel plain{p.alpha, p.beta, Fading::none()};
    CommandOutput out;
    for (std::size_t k = 1; k <= n; ++k) {
        const double t = span * static_cast<double>(k) / static_cast<double>(n + 1);
        const Point2 rx{t * std::cos(p.angle), t * std::sin(p.angle)};
        json j;
        j["x"] = rx.x;
        j["y"] = rx.y;
        j["distance"] = t;
        j["p_fading"] = grid_success_prob_fading(o, rx, S, model);
        j["p_nofading"] = grid_success_prob_nofading(o, rx, S, plain);
        if (p.trials > 0) {
            const auto est = grid_success_mc(o, rx, S, model, p.trials, detail::derive_seed(p.seed, k));
            j["p_mc"] = est.p;
            j["std_err"] = est.std_err;
        }
        out.rows.push_back(std::move(j));
    }
    out.summary = std::to_string(n) + " receiver positions";
    return out;
}

CommandOutput cmd_simulate(const Params& p)
{
    const auto spec = grid_of(p);
    const auto model = model_of(p);
    SimConfig cfg;
    if (p.scheme == "grid")
        cfg.scheme = MacScheme::grid_pattern(spec);
    else if (p.scheme == "aloha")
        cfg.scheme = MacScheme::aloha(p.lambda_given ? p.lambda : grid_density(spec));
    else
        throw invalid_argument_error("--scheme must be grid or aloha");
    cfg.model = model;
    cfg.node_density = p.nu_ratio * cfg.scheme.density();
    cfg.snap_radius = p.snap;
    cfg.slots = p.slots;
    cfg.seed = p.seed;
    double L = p.route;
    if (!(L > 0.0)) {
        detail::require(cfg.scheme.kind == SchemeKind::grid, "--route is required for the aloha scheme");
        const ChannelModel plain{p.alpha, p.beta, Fading::none()};
        const double span = std::max(spec.k1, spec.k2) * spec.d;
        L = 10.0 * grid_range(spec, Extent{40.0 * span}, plain).r_lambda;
    }
    cfg.route_length = L;
    cfg.extent = Extent{p.extent_given ? p.extent : std::max(3.0 * L, 10.0 * spec.d)};
    const auto res = run_simulation(cfg, p.packets);
    CommandOutput out;
    for (std::size_t id = 0; id < res.packets.size(); ++id) {
        const auto& pk = res.packets[id];
        Point2 from = pk.source;
        for (std::size_t h = 0; h < pk.hops.size(); ++h) {
            json j;
            j["packet_id"] = id;
            j["slot"] = pk.hop_slots[h];
            j["hop"] = h + 1;
            j["from_x"] = from.x;
            j["from_y"] = from.y;
            j["to_x"] = pk.hops[h].x;
            j["to_y"] = pk.hops[h].y;
            j["progress"] = pk.progress_per_hop[h];
            out.rows.push_back(std::move(j));
            from = pk.hops[h];
        }
    }
    out.sidecar = io::simulation_summary(res, cfg);
    for (const auto& w : res.summary.warnings)
        std::cerr << "warning: " << w << '\n';
    out.summary = "delivered " + std::to_string(res.summary.delivered) + "/" + std::to_string(res.summary.packets) +
                  ", mean hops " + fmt(res.summary.mean_hops);
    return out;
}

CommandOutput cmd_compare(const Params& p)
{
    const auto sp = series_of(p);
    const Fading f = parse_fading(p.fading);
    const ChannelModel plain{p.alpha, p.beta, Fading::none()};
    plain.validate();

    struct Entry {
        std::string scheme;
        double ratio;
        double r1;
        double p;
    };
    std::vector<Entry> entries;
    SeriesParams unit = sp;
    unit.lambda = 1.0;
    const auto opt = optimize_range(unit, f);
    entries.push_back({"aloha", 1.0, opt.r, opt.p});

    GridSpec rect = GridSpec::rectangular(p.d, 1.0, 2.0);
    if (parse_pattern(p.pattern) == PatternKind::rectangular && p.k1 < p.k2)
        rect = GridSpec::rectangular(p.d, p.k1, p.k2);
    const std::vector<GridSpec> grids{GridSpec::square(p.d), rect, GridSpec::hexagonal(p.d), GridSpec::triangular(p.d)};
    std::vector<std::future<double>> jobs;
    for (const auto& g : grids)
        jobs.push_back(std::async(std::launch::async, [&, g] { return grid_range(g, Extent{p.extent}, plain).r1; }));
    for (std::size_t k = 0; k < grids.size(); ++k)
        entries.push_back({std::string(to_string(grids[k].kind)), grids[k].k1 / grids[k].k2, jobs[k].get(), 1.0});

    const Entry& tri = entries.back();
    const double tri_inv = 1.0 / (tri.r1 * tri.p);
    CommandOutput out;
    for (const auto& e : entries) {
        const double inv = 1.0 / (e.r1 * e.p);
        json j;
        j["scheme"] = e.scheme;
        j["k1_over_k2"] = e.ratio;
        j["r1"] = e.r1;
        j["p"] = e.p;
        j["inv_rp"] = inv;
        j["r1_normalized"] = e.r1 / tri.r1;
        j["inv_rp_normalized"] = inv / tri_inv;
        out.rows.push_back(std::move(j));
    }
    out.summary = "triangular/aloha r1 ratio " + fmt(tri.r1 / opt.r) + ", aloha/triangular 1/(rp) ratio " +
                  fmt((1.0 / (opt.r * opt.p)) / tri_inv);
    return out;
}

CommandOutput cmd_field(const Params& p)
{
    const auto spec = grid_of(p);
    const auto model = model_of(p);
    const auto S = gen_grid(spec, Extent{p.extent});
    const std::size_t o = origin_index(S, 1e-9 * spec.d);
    detail::require(o < S.size(), "grid has no transmitter at the origin");
    const double half = p.half > 0.0 ? p.half : 2.0 * spec.d;
    const std::size_t n = p.points ? p.points : 101;
    CommandOutput out;
    if (p.quantity == "membership") {
        for (const auto& m : membership_grid(o, S, model, {0.0, 0.0}, half, n)) {
            json j;
            j["x"] = m.x;
            j["y"] = m.y;
            j["member"] = m.member ? 1 : 0;
            out.rows.push_back(std::move(j));
        }
    } else {
        FieldQuantity q;
        if (p.quantity == "sir")
            q = FieldQuantity::sir;
        else if (p.quantity == "interference")
            q = FieldQuantity::interference;
        else
            throw invalid_argument_error("--quantity must be sir, interference or membership");
        for (const auto& f : rasterize_field(S, o, p.alpha, q, {0.0, 0.0}, half, n, p.db)) {
            json j;
            j["x"] = f.x;
            j["y"] = f.y;
            j["value"] = io::number(f.value);
            out.rows.push_back(std::move(j));
        }
    }
    out.summary = p.quantity + " on a " + std::to_string(n) + "x" + std::to_string(n) + " raster";
    return out;
}

struct Command {
    std::function<CommandOutput(const Params&)> run;
    std::vector<std::string> axes;
    std::string default_format;
};

const std::map<std::string, Command>& commands()
{
    static const std::map<std::string, Command> table{
        {"grid-range", {cmd_grid_range, {"beta", "alpha", "d", "k1", "k2", "extent"}, "csv"}},
        {"aloha-curve", {cmd_aloha_curve, {"beta", "alpha", "lambda"}, "csv"}},
        {"optimize", {cmd_optimize, {"beta", "alpha", "lambda"}, "json"}},
        {"asympt-beta", {cmd_asympt_beta, {"alpha"}, "csv"}},
        {"asympt-alpha", {cmd_asympt_alpha, {}, "csv"}},
        {"trace", {cmd_trace, {"beta", "alpha", "d", "k1", "k2"}, "csv"}},
        {"fading-curve", {cmd_fading_curve, {"beta", "alpha", "d"}, "csv"}},
        {"simulate", {cmd_simulate, {"beta", "alpha", "nu-ratio"}, "csv"}},
        {"compare", {cmd_compare, {"beta", "alpha"}, "csv"}},
        {"field", {cmd_field, {"beta", "alpha", "d"}, "csv"}},
    };
    return table;
}

void set_axis(Params& p, const std::string& axis, double v)
{
    if (axis == "beta")
        p.beta = v;
    else if (axis == "alpha")
        p.alpha = v;
    else if (axis == "d")
        p.d = v;
    else if (axis == "k1")
        p.k1 = v;
    else if (axis == "k2")
        p.k2 = v;
    else if (axis == "extent")
        p.extent = v;
    else if (axis == "lambda") {
        p.lambda = v;
        p.lambda_given = true;
    } else if (axis == "nu-ratio")
        p.nu_ratio = v;
    else
        throw invalid_argument_error("unknown sweep axis " + axis);
}

double parse_number(const std::string& text)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw invalid_argument_error("not a number: '" + text + "'");
    }
    if (used != text.size())
        throw invalid_argument_error("not a number: '" + text + "'");
    return v;
}

/// "v1,v2,..." or "log:lo:hi:n" / "lin:lo:hi:n".
std::vector<double> parse_values(const std::string& text)
{
    std::vector<double> out;
    if (text.empty())
        return out;
    if (text.rfind("log:", 0) == 0 || text.rfind("lin:", 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(text.substr(4));
        for (std::string item; std::getline(ss, item, ':');)
            parts.push_back(item);
        detail::require(parts.size() == 3, "range values take the form log:lo:hi:n or lin:lo:hi:n");
        const double lo = parse_number(parts[0]);
        const double hi = parse_number(parts[1]);
        const double nd = parse_number(parts[2]);
        detail::require(nd >= 1 && nd == std::floor(nd), "range count must be a positive integer");
        const auto n = static_cast<std::size_t>(nd);
        const bool log = text[1] == 'o';
        if (log)
            detail::require(lo > 0.0 && hi > 0.0, "log range bounds must be positive");
        for (std::size_t k = 0; k < n; ++k) {
            const double t = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
            out.push_back(log ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
        }
        return out;
    }
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        if (!item.empty())
            out.push_back(parse_number(item));
    }
    return out;
}

std::string csv_cell(const json& v)
{
    if (v.is_number_float())
        return io::format_double(v.get<double>());
    if (v.is_number_unsigned())
        return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer())
        return std::to_string(v.get<std::int64_t>());
    if (v.is_boolean())
        return v.get<bool>() ? "1" : "0";
    if (v.is_string())
        return v.get<std::string>();
    return "";
}

void write_rows(std::ostream& os, const std::vector<json>& rows, const std::string& format, bool force_array)
{
    if (format == "json") {
        if (rows.size() == 1 && !force_array)
            io::write_json(os, rows.front());
        else
            io::write_json(os, json(rows));
        return;
    }
    if (rows.empty())
        return;
    std::vector<std::string> columns;
    for (const auto& [key, value] : rows.front().items())
        columns.push_back(key);
    for (std::size_t c = 0; c < columns.size(); ++c)
        os << (c ? "," : "") << columns[c];
    os << '\n';
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (const auto& [key, value] : row.items()) {
            if (c >= columns.size() || key != columns[c])
                throw error("inconsistent CSV columns");
            os << (c ? "," : "") << csv_cell(value);
            ++c;
        }
        os << '\n';
    }
}

std::filesystem::path output_path(const Params& p, const std::string& format)
{
    if (!p.out.empty())
        return p.out;
    const char* dir = std::getenv("MACGEO_OUTPUT_DIR");
    return std::filesystem::path(dir && *dir ? dir : ".") / (p.command + "." + format);
}

/// Appends "--key value" for every config entry the command line does not set.
std::vector<std::string> merge_config(const std::vector<std::string>& args)
{
    std::string path;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size())
            path = args[k + 1];
        else if (args[k].rfind("--config=", 0) == 0)
            path = args[k].substr(9);
    }
    if (path.empty())
        return args;
    std::ifstream in(path);
    if (!in)
        throw invalid_argument_error("cannot read config " + path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw invalid_argument_error("config " + path + ": " + e.what());
    }
    if (!cfg.is_object())
        throw invalid_argument_error("config " + path + " must hold a JSON object");

    auto given = [&](const std::string& key) {
        const std::string flag = "--" + key;
        return std::any_of(args.begin(), args.end(),
                           [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
    };
    std::vector<std::string> merged = args;
    const bool has_command =
        std::any_of(args.begin(), args.end(), [](const std::string& a) { return commands().count(a) > 0; });
    for (const auto& [key, value] : cfg.items()) {
        if (key == "command") {
            if (!has_command && value.is_string())
                merged.insert(merged.begin(), value.get<std::string>());
            continue;
        }
        if (key == "config" || given(key))
            continue;
        if (value.is_boolean()) {
            if (value.get<bool>())
                merged.push_back("--" + key);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value)
                joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : csv_cell(v));
            merged.push_back("--" + key);
            merged.push_back(joined);
        } else {
            merged.push_back("--" + key);
            merged.push_back(value.is_string() ? value.get<std::string>() : csv_cell(value));
        }
    }
    return merged;
}

int run(int argc, char** argv)
{
    Params p;
    CLI::App app{"Spatial reuse of grid and ALOHA transmitter patterns: ranges, success probabilities, lattice "
                 "limits and relaying."};
    app.add_option("command", p.command, "grid-range | aloha-curve | optimize | asympt-beta | asympt-alpha | trace | "
                                         "fading-curve | simulate | compare | field");
    app.add_option("--beta", p.beta, "SIR threshold");
    app.add_option("--alpha", p.alpha, "attenuation exponent (> 2)");
    app.add_option("--pattern", p.pattern, "square | rectangular | hexagonal | triangular | linear");
    app.add_option("--k1", p.k1, "row spacing factor (rectangular, linear)");
    app.add_option("--k2", p.k2, "column spacing factor (rectangular, linear)");
    app.add_option("--d", p.d, "grid spacing in meters");
    auto* extent_opt = app.add_option("--extent", p.extent, "half-width of the network square in meters");
    auto* lambda_opt = app.add_option("--lambda", p.lambda, "transmitter density for ALOHA");
    app.add_option("--fading", p.fading, "none | log-uniform:f | exponential");
    app.add_option("--trials", p.trials, "Monte Carlo trials (fading-curve)");
    app.add_option("--seed", p.seed, "root seed");
    app.add_option("--out", p.out, "output file, '-' for stdout");
    app.add_option("--config", "JSON file of option values; command-line flags win");
    app.add_option("--format", p.format, "csv | json");
    app.add_option("--sweep", p.sweep, "numeric parameter to sweep");
    auto* values_opt = app.add_option("--values", p.values, "sweep values: v1,v2,... or log:lo:hi:n or lin:lo:hi:n");
    app.add_option("--r-min", p.r_min, "smallest range (aloha-curve)");
    app.add_option("--r-max", p.r_max, "largest range (aloha-curve)");
    app.add_option("--points", p.points, "samples per curve or raster side");
    app.add_option("--truncation", p.truncation, "lattice-sum radius in units of d (asympt-beta)");
    app.add_option("--richardson", p.richardson, "radius doublings for the Richardson estimate (asympt-beta)");
    app.add_option("--verify-alpha", p.verify_alpha, "also trace at this alpha (asympt-alpha)");
    app.add_flag("--check-truncation", p.check_truncation, "double the extent until r1 settles");
    app.add_option("--quantity", p.quantity, "sir | interference | membership (field)");
    app.add_option("--half", p.half, "raster half-width in meters (field)");
    app.add_flag("--db", p.db, "report field values in dB");
    app.add_option("--angle", p.angle, "receiver line direction in radians (fading-curve)");
    app.add_option("--span", p.span, "receiver line length in meters (fading-curve)");
    app.add_option("--scheme", p.scheme, "grid | aloha (simulate)");
    app.add_option("--nu-ratio", p.nu_ratio, "node density over transmitter density (simulate)");
    app.add_option("--packets", p.packets, "tracked packets (simulate)");
    app.add_option("--slots", p.slots, "slot budget (simulate)");
    app.add_option("--route", p.route, "source-destination distance in meters (simulate)");
    app.add_option("--snap", p.snap, "snap radius in meters (simulate)");

    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(args);
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_invalid_parameter;
    }
    p.extent_given = extent_opt->count() > 0;
    p.lambda_given = lambda_opt->count() > 0;
    p.values_given = values_opt->count() > 0;

    const auto it = commands().find(p.command);
    if (it == commands().end()) {
        std::cerr << "unknown command '" << p.command << "'\n" << app.help();
        return exit_unknown_command;
    }
    const Command& cmd = it->second;
    const std::string format = p.format.empty() ? cmd.default_format : p.format;
    detail::require(format == "csv" || format == "json", "--format must be csv or json");

    CommandOutput result;
    const bool sweeping = !p.sweep.empty();
    if (sweeping) {
        detail::require(std::find(cmd.axes.begin(), cmd.axes.end(), p.sweep) != cmd.axes.end(),
                        "'" + p.sweep + "' is not a sweepable parameter of " + p.command);
        const auto values = parse_values(p.values);
        if (values.empty()) {
            std::cout << p.command << ": empty sweep, nothing to do\n";
            return exit_ok;
        }
        std::vector<Params> jobs(values.size(), p);
        for (std::size_t k = 0; k < values.size(); ++k) {
            set_axis(jobs[k], p.sweep, values[k]);
            jobs[k].seed = detail::derive_seed(p.seed, k);
        }
        // Fan out in waves; rows are collected in value order.
        const std::size_t wave = std::max(1u, std::thread::hardware_concurrency());
        std::vector<CommandOutput> parts(values.size());
        for (std::size_t start = 0; start < values.size(); start += wave) {
            std::vector<std::future<CommandOutput>> running;
            const std::size_t stop = std::min(values.size(), start + wave);
            for (std::size_t k = start; k < stop; ++k)
                running.push_back(std::async(std::launch::async, cmd.run, std::cref(jobs[k])));
            for (std::size_t k = start; k < stop; ++k)
                parts[k] = running[k - start].get();
        }
        json sidecars = json::array();
        for (std::size_t k = 0; k < values.size(); ++k) {
            for (auto& row : parts[k].rows) {
                json prefixed;
                prefixed[p.sweep] = values[k];
                for (auto& [key, value] : row.items())
                    prefixed[key] = value;
                result.rows.push_back(std::move(prefixed));
            }
            if (parts[k].sidecar)
                sidecars.push_back(json{{p.sweep, values[k]}, {"result", *parts[k].sidecar}});
        }
        if (!sidecars.empty())
            result.sidecar = sidecars;
        result.summary = "sweep over " + p.sweep + " (" + std::to_string(values.size()) + " values)";
    } else {
        result = cmd.run(p);
    }

    if (p.out == "-") {
        write_rows(std::cout, result.rows, format, sweeping);
        std::cerr << p.command << ": " << result.summary << '\n';
        return exit_ok;
    }
    const auto path = output_path(p, format);
    auto os = io::open_output(path);
    write_rows(os, result.rows, format, sweeping);
    io::finish(os, path);
    std::string extra;
    if (result.sidecar) {
        const std::filesystem::path side = path.string() + ".json";
        auto js = io::open_output(side);
        io::write_json(js, *result.sidecar);
        io::finish(js, side);
        extra = " (+ " + side.string() + ")";
    }
    std::cout << p.command << ": " << result.summary << "; " << result.rows.size() << " row(s) -> " << path.string()
              << extra << '\n';
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const invalid_argument_error& e) {
        std::cerr << "invalid parameter: " << e.what() << '\n';
        return exit_invalid_parameter;
    } catch (const output_error& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return exit_unwritable;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return exit_unwritable;
    } catch (const macgeo::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_module_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_module_error;
    }
}
