// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion.  Exits non-zero when any line fails.

#include <macgeo/aloha.hpp>
#include <macgeo/asymptotics.hpp>
#include <macgeo/io.hpp>
#include <macgeo/multihop.hpp>
#include <macgeo/propagation.hpp>
#include <macgeo/reception.hpp>
#include <macgeo/spatial.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace macgeo;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(const std::string& id, const std::string& name, const std::function<Outcome()>& body,
         double limit_seconds = 0.0)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_seconds > 0.0 && secs > limit_seconds) {
        o.pass = false;
        o.detail += "; over the " + io::format_double(limit_seconds) + " s budget";
    }
    char time_text[32];
    std::snprintf(time_text, sizeof time_text, "%.1f s", secs);
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << " (" << time_text
              << ")" << std::endl;
    if (!o.pass)
        ++failures;
}

std::string fixed(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1e", v);
    return buf;
}

std::string label(const GridSpec& g)
{
    std::string s(to_string(g.kind));
    if (g.has_aspect())
        s += " " + io::format_double(g.k1) + ":" + io::format_double(g.k2);
    return s;
}

const ChannelModel plain_model(double beta, double alpha)
{
    return {alpha, beta, Fading::none()};
}

/// Mismatches of MC cells against analytic values at 3 null-hypothesis standard errors.
struct CellCheck {
    std::size_t cells = 0;
    std::size_t bad = 0;
    double worst_z = 0.0;
    std::string worst;

    void add(double p_mc, double p_ref, std::size_t trials, const std::string& where)
    {
        const double se = std::sqrt(p_ref * (1.0 - p_ref) / static_cast<double>(trials));
        const double diff = std::abs(p_mc - p_ref);
        const double z = diff == 0.0 ? 0.0 : diff / se;
        ++cells;
        if (!(diff <= 3.0 * se))
            ++bad;
        if (z > worst_z) {
            worst_z = z;
            worst = where;
        }
    }

    [[nodiscard]] std::string summary() const
    {
        return std::to_string(cells - bad) + "/" + std::to_string(cells) + " cells within 3 SE, worst " +
               fixed(worst_z, 2) + " SE at " + worst;
    }
};

Outcome beta_inf_table_check()
{
    const std::array<double, 5> expected{0.638232, 0.554905, 0.409452, 0.609856, 0.644845};
    const auto rows = beta_inf_table(4.0);
    double worst = 0.0;
    std::ostringstream os;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        worst = std::max(worst, std::abs(rows[k].value - expected[k]));
        os << (k ? ", " : "") << fixed(rows[k].value);
    }
    return {worst <= 1e-3, os.str() + "; max deviation " + sci(worst)};
}

Outcome voronoi_check()
{
    std::vector<std::future<VoronoiDeviation>> jobs;
    const auto patterns = table_patterns();
    for (const auto& g : patterns)
        jobs.push_back(std::async(std::launch::async, [g] { return voronoi_limit_check(g, 100.0); }));
    bool pass = true;
    std::ostringstream os;
    for (std::size_t k = 0; k < patterns.size(); ++k) {
        const auto dev = jobs[k].get();
        pass = pass && dev.relative <= 0.02;
        os << (k ? ", " : "") << label(patterns[k]) << " " << fixed(dev.traced, 4) << " vs " << fixed(dev.closed_form, 4)
           << " (" << fixed(100.0 * dev.relative, 2) << "%)";
    }
    return {pass, os.str()};
}

Outcome apollonius_check()
{
    const std::array<double, 5> ratios{1.2, 1.6, 2.5, 3.5, 5.0};
    const std::array<double, 4> alphas{2.5, 3.0, 4.0, 6.0};
    const double D = 1.0;
    const std::vector<Point2> pts{{0.0, 0.0}, {D, 0.0}};
    const auto S = PointSet::from_points(pts, 1.0, 50.0);
    double worst = 0.0;
    for (double c : ratios) {
        for (double alpha : alphas) {
            const double beta = std::pow(c, alpha);
            const double got = trace_contour(0, S, plain_model(beta, alpha)).r_lambda;
            const double want = D / (c - 1.0);
            worst = std::max(worst, std::abs(got - want) / want);
        }
    }
    return {worst <= 1e-3, "20 (beta, alpha) pairs, max relative error " + sci(worst)};
}

Outcome homothetic_check()
{
    const std::vector<GridSpec> shapes{GridSpec::square(1.0), GridSpec::rectangular(1.0, 1.0, 2.0),
                                       GridSpec::hexagonal(1.0), GridSpec::triangular(1.0)};
    std::vector<std::future<std::pair<double, double>>> jobs;
    for (auto g : shapes) {
        jobs.push_back(std::async(std::launch::async, [g]() mutable {
            g.d = 25.0;
            const double a = grid_range(g, Extent{5000.0}, plain_model(10.0, 4.0)).r1;
            g.d = 50.0;
            const double b = grid_range(g, Extent{5000.0}, plain_model(10.0, 4.0)).r1;
            return std::pair{a, b};
        }));
    }
    bool pass = true;
    std::ostringstream os;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        const auto [a, b] = jobs[k].get();
        const double rel = std::abs(a - b) / a;
        pass = pass && rel <= 0.005;
        os << (k ? ", " : "") << label(shapes[k]) << " " << fixed(a, 5) << "/" << fixed(b, 5) << " ("
           << fixed(100.0 * rel, 3) << "%)";
    }
    return {pass, os.str()};
}

Outcome aloha_mc_check()
{
    McBatchConfig cfg;
    cfg.alphas = {3.0, 4.0, 6.0};
    cfg.ranges = {0.1, 0.2, 0.3, 0.5, 1.0};
    cfg.betas = {0.1, 1.0, 10.0, 100.0};
    cfg.fadings = {Fading::none(), Fading::log_uniform(1.0)};
    cfg.trials = 1'000'000;
    cfg.seed = 20'240'501;
    const auto grid = mc_aloha_batch(cfg);
    CellCheck check;
    std::map<std::string, int> methods;
    for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
        for (std::size_t f = 0; f < cfg.fadings.size(); ++f) {
            for (std::size_t r = 0; r < cfg.ranges.size(); ++r) {
                for (std::size_t b = 0; b < cfg.betas.size(); ++b) {
                    SeriesParams sp;
                    sp.lambda = cfg.lambda;
                    sp.beta = cfg.betas[b];
                    sp.alpha = cfg.alphas[a];
                    const auto ref = aloha_success(cfg.ranges[r], sp, cfg.fadings[f]);
                    ++methods[std::string(to_string(ref.method))];
                    check.add(grid.at(a, f, r, b).p, ref.p, cfg.trials,
                              "(r=" + io::format_double(cfg.ranges[r]) + ", beta=" + io::format_double(sp.beta) +
                                  ", alpha=" + io::format_double(sp.alpha) + ", " + to_string(cfg.fadings[f]) + ")");
                }
            }
        }
    }
    std::string route;
    for (const auto& [m, n] : methods)
        route += (route.empty() ? "" : ", ") + m + " " + std::to_string(n);
    return {check.bad == 0, check.summary() + "; analytic route: " + route};
}

Outcome exponential_check()
{
    struct Config {
        double lambda, alpha, r, beta;
    };
    const std::vector<Config> configs{{1.0, 4.0, 0.1, 1.0},  {1.0, 4.0, 0.3, 10.0}, {1.0, 4.0, 0.5, 0.1},
                                      {1.0, 3.0, 0.2, 1.0},  {1.0, 3.0, 0.1, 10.0}, {1.0, 6.0, 0.3, 1.0},
                                      {1.0, 6.0, 0.5, 10.0}, {1.0, 4.0, 0.2, 100.0}, {0.5, 4.0, 0.4, 1.0},
                                      {2.0, 4.0, 0.15, 1.0}};
    CellCheck check;
    // One batch per density; every configuration reads its own cell.
    std::map<double, McBatchConfig> batches;
    for (const auto& c : configs) {
        auto& b = batches[c.lambda];
        b.lambda = c.lambda;
        b.fadings = {Fading::exponential()};
        b.trials = 1'000'000;
        b.seed = 77;
    }
    for (auto& [lambda, b] : batches) {
        std::vector<double> alphas, ranges, betas;
        for (const auto& c : configs) {
            if (c.lambda != lambda)
                continue;
            alphas.push_back(c.alpha);
            ranges.push_back(c.r);
            betas.push_back(c.beta);
        }
        for (auto* v : {&alphas, &ranges, &betas}) {
            std::sort(v->begin(), v->end());
            v->erase(std::unique(v->begin(), v->end()), v->end());
        }
        b.alphas = alphas;
        b.ranges = ranges;
        b.betas = betas;
        const auto grid = mc_aloha_batch(b);
        auto index = [](const std::vector<double>& v, double x) {
            return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
        };
        for (const auto& c : configs) {
            if (c.lambda != lambda)
                continue;
            SeriesParams sp;
            sp.lambda = c.lambda;
            sp.beta = c.beta;
            sp.alpha = c.alpha;
            const double ref = aloha_prob_exponential(c.r, sp);
            const auto& cell = grid.at(index(alphas, c.alpha), 0, index(ranges, c.r), index(betas, c.beta));
            check.add(cell.p, ref, b.trials,
                      "(lambda=" + io::format_double(c.lambda) + ", r=" + io::format_double(c.r) +
                          ", beta=" + io::format_double(c.beta) + ", alpha=" + io::format_double(c.alpha) + ")");
        }
    }
    return {check.bad == 0 && check.cells == 10, check.summary()};
}

Outcome headline_check()
{
    SeriesParams sp;
    sp.beta = 10.0;
    sp.alpha = 4.0;
    const auto opt = optimize_range(sp);
    const double tri = grid_range(GridSpec::triangular(25.0), Extent{5000.0}, plain_model(10.0, 4.0)).r1;
    const double range_ratio = tri / opt.r;
    const double capacity_ratio = opt.inv_rp / (1.0 / tri);
    const bool pass = range_ratio >= 1.7 && range_ratio <= 2.3 && capacity_ratio >= 2.5 && capacity_ratio <= 3.5;
    return {pass, "triangular r1 " + fixed(tri) + ", ALOHA r1 " + fixed(opt.r) + " (p " + fixed(opt.p, 4) +
                      "); range ratio " + fixed(range_ratio, 4) + ", capacity ratio " + fixed(capacity_ratio, 4)};
}

Outcome fading_penalty_check()
{
    bool pass = true;
    std::ostringstream os;
    for (double beta : {1.0, 10.0, 100.0}) {
        SeriesParams sp;
        sp.beta = beta;
        sp.alpha = 4.0;
        const double r0 = optimize_range(sp).r;
        const double rf = optimize_range(sp, Fading::log_uniform(1.0)).r;
        const double drop = (r0 - rf) / r0;
        pass = pass && drop >= 0.01 && drop <= 0.05;
        os << (beta == 1.0 ? "" : ", ") << "beta " << io::format_double(beta) << ": " << fixed(100.0 * drop, 2)
           << "% lower";
    }
    return {pass, os.str()};
}

Outcome grid_fading_check()
{
    const auto S = gen_grid(GridSpec::square(1.0), Extent{20.0});
    const std::size_t o = origin_index(S, 1e-12);
    const ChannelModel model{4.0, 1.0, Fading::exponential()};
    CellCheck check;
    for (int k = 1; k <= 10; ++k) {
        const double t = k / 11.0;
        const Point2 rx{t, t};
        const double ref = grid_success_prob_fading(o, rx, S, model);
        const auto est = grid_success_mc(o, rx, S, model, 1'000'000, detail::derive_seed(5, static_cast<unsigned>(k)));
        check.add(est.p, ref, est.trials, "t=" + std::to_string(k) + "/11");
    }
    return {check.bad == 0, check.summary()};
}

Outcome multihop_check()
{
    const GridSpec spec = GridSpec::square(25.0);
    const ChannelModel model = plain_model(10.0, 4.0);
    const double r_lambda = grid_range(spec, Extent{1000.0}, model).r_lambda;
    SimConfig cfg;
    cfg.scheme = MacScheme::grid_pattern(spec);
    cfg.model = model;
    cfg.node_density = 100.0 * grid_density(spec);
    cfg.route_length = 10.0 * r_lambda;
    cfg.extent = Extent{3.0 * cfg.route_length};
    cfg.slots = 20'000;
    cfg.seed = 1;
    const std::size_t packets = 200;

    auto log_of = [&] {
        const auto res = run_simulation(cfg, packets);
        std::ostringstream os;
        io::write_hop_log_csv(os, res);
        io::write_json(os, io::simulation_summary(res, cfg));
        return std::pair{res.summary, os.str()};
    };
    auto first = std::async(std::launch::async, log_of);
    auto second = std::async(std::launch::async, log_of);
    const auto [summary, log_a] = first.get();
    const auto log_b = second.get().second;

    const double target = std::ceil(cfg.route_length / r_lambda);
    const double dev = std::abs(summary.mean_hops - target) / target;
    const bool identical = log_a == log_b;
    const bool hops_ok = dev <= 0.10 && summary.delivered == summary.packets;
    return {hops_ok && identical,
            "mean hops " + fixed(summary.mean_hops, 3) + " vs ceil(L/r) = " + io::format_double(target) + " (" +
                fixed(100.0 * dev, 1) + "% off, limit 10%), delivered " + std::to_string(summary.delivered) + "/" +
                std::to_string(summary.packets) + ", relay progress " +
                fixed(summary.mean_progress_relay / r_lambda, 3) + " r; logs " +
                (identical ? "byte-identical" : "DIFFER") + " across reruns (" + std::to_string(log_a.size()) +
                " bytes)"};
}

/// r1 for each pattern across a 10-point log sweep of beta over [0.01, 100].
std::vector<std::vector<double>> beta_sweep(const std::vector<GridSpec>& shapes, const std::vector<double>& betas)
{
    std::vector<std::future<std::vector<double>>> jobs;
    for (auto g : shapes) {
        jobs.push_back(std::async(std::launch::async, [g, &betas]() mutable {
            g.d = 25.0;
            std::vector<double> r1;
            for (double beta : betas)
                r1.push_back(grid_range(g, Extent{2000.0}, plain_model(beta, 4.0)).r1);
            return r1;
        }));
    }
    std::vector<std::vector<double>> out;
    for (auto& j : jobs)
        out.push_back(j.get());
    return out;
}

} // namespace

int main()
{
    std::cout << "macgeo acceptance run" << std::endl;
    run("1", "beta->inf table at alpha=4 within 1e-3", beta_inf_table_check, 10.0);
    run("2", "alpha=100 tracer within 2% of the Voronoi circumradius", voronoi_check, 120.0);
    run("3", "two-transmitter range equals D/(beta^(1/alpha)-1) within 1e-3", apollonius_check, 60.0);
    run("4", "r1 at d=25 vs d=50 within 0.5%", homothetic_check);
    run("5", "ALOHA analytic p vs 1e6-trial MC within 3 SE, none and log-uniform", aloha_mc_check, 600.0);
    run("6", "exponential-fading closed form vs MC within 3 SE", exponential_check);
    run("7", "triangular vs ALOHA range and capacity ratios", headline_check);
    run("8", "log-uniform fading lowers the ALOHA optimum by 1-5%", fading_penalty_check);
    run("9", "grid fading product vs 1e6-trial MC within 3 SE", grid_fading_check);
    run("10", "multihop hop count within 10% of ceil(L/r) and reproducible logs", multihop_check);

    const std::vector<GridSpec> shapes{GridSpec::square(1.0), GridSpec::rectangular(1.0, 1.0, 2.0),
                                       GridSpec::rectangular(1.0, 1.0, 4.0), GridSpec::hexagonal(1.0),
                                       GridSpec::triangular(1.0)};
    std::vector<double> betas;
    for (int k = 0; k < 10; ++k)
        betas.push_back(0.01 * std::pow(1e4, k / 9.0));
    std::vector<std::vector<double>> sweep;
    run("sweep", "beta sweep orderings over [0.01, 100]", [&] {
        sweep = beta_sweep(shapes, betas);
        auto best = [&](std::size_t b) {
            std::size_t arg = 0;
            for (std::size_t s = 1; s < shapes.size(); ++s)
                if (sweep[s][b] > sweep[arg][b])
                    arg = s;
            return arg;
        };
        const std::size_t lo = best(0), hi = best(betas.size() - 1);
        const bool aspect = sweep[0][0] < sweep[1][0] && sweep[1][0] < sweep[2][0];
        return Outcome{lo == 2 && hi == 4 && aspect,
                       "best at beta=0.01: " + label(shapes[lo]) + " (" + fixed(sweep[lo][0], 4) +
                           "), best at beta=100: " + label(shapes[hi]) + " (" + fixed(sweep[hi].back(), 4) +
                           "), r1 at beta=0.01 grows as k1/k2 falls 1 -> 1/2 -> 1/4: " + (aspect ? "yes" : "no")};
    });

    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criterion line(s) failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
