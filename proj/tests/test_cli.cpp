#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

/// Runs the CLI with `args` through the shell, capturing stdout.
Run cli(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + MACGEO_CLI + std::string(" ") + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;)
        r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string header(const std::string& csv)
{
    return csv.substr(0, csv.find('\n'));
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name)
{
    auto dir = fs::temp_directory_path() / ("macgeo_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Cli, GoldenHeaders)
{
    const std::vector<std::pair<std::string, std::string>> cases{
        {"grid-range --extent 250", "pattern,k1,k2,d,beta,alpha,extent,lambda,r_lambda,r1"},
        {"grid-range --extent 250 --check-truncation",
         "pattern,k1,k2,d,beta,alpha,extent,lambda,r_lambda,r1,truncation_change"},
        {"aloha-curve --points 4", "r,p,rp,method,fading"},
        {"optimize --format csv", "beta,alpha,lambda,fading,r_opt,r1,p_at_opt,rp,inv_rp,method"},
        {"asympt-beta", "pattern,k1_over_k2,value"},
        {"asympt-alpha", "pattern,k1_over_k2,value"},
        {"trace --extent 250", "x,y"},
        {"fading-curve --d 1 --extent 30 --points 3", "x,y,distance,p_fading,p_nofading"},
        {"fading-curve --d 1 --extent 30 --points 3 --trials 1000", "x,y,distance,p_fading,p_nofading,p_mc,std_err"},
        {"simulate --extent 150 --route 60 --packets 3 --slots 500",
         "packet_id,slot,hop,from_x,from_y,to_x,to_y,progress"},
        {"compare --extent 250", "scheme,k1_over_k2,r1,p,inv_rp,r1_normalized,inv_rp_normalized"},
        {"field --extent 100 --points 5", "x,y,value"},
        {"field --extent 100 --points 5 --quantity membership", "x,y,member"},
    };
    for (const auto& [args, want] : cases) {
        const auto r = cli(args + " --out -");
        ASSERT_EQ(r.code, 0) << args;
        EXPECT_EQ(header(r.out), want) << args;
    }
}

TEST(Cli, TableRowCounts)
{
    EXPECT_EQ(lines(cli("asympt-beta --out -").out).size(), 6u);
    EXPECT_EQ(lines(cli("aloha-curve --points 7 --fading exponential --out -").out).size(), 15u);
    EXPECT_EQ(lines(cli("field --extent 100 --points 5 --out -").out).size(), 26u);
}

TEST(Cli, CompareNormalizesToTriangular)
{
    const auto r = cli("compare --extent 250 --format json --out -");
    ASSERT_EQ(r.code, 0);
    const auto rows = json::parse(r.out);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0]["scheme"], "aloha");
    EXPECT_EQ(rows[4]["scheme"], "triangular");
    EXPECT_EQ(rows[4]["r1_normalized"].get<double>(), 1.0);
    EXPECT_EQ(rows[4]["inv_rp_normalized"].get<double>(), 1.0);
    for (const auto& row : rows)
        EXPECT_NEAR(row["inv_rp"].get<double>(), 1.0 / (row["r1"].get<double>() * row["p"].get<double>()), 1e-12);
}

TEST(Cli, JsonIsObjectForOneRowAndArrayOtherwise)
{
    const auto single = json::parse(cli("optimize --out -").out);
    EXPECT_TRUE(single.is_object());
    EXPECT_EQ(single["method"], "series");
    const auto table = json::parse(cli("asympt-alpha --format json --out -").out);
    EXPECT_TRUE(table.is_array());
    const auto sweep = json::parse(cli("optimize --sweep beta --values 10 --out -").out);
    ASSERT_TRUE(sweep.is_array());
    EXPECT_EQ(sweep[0]["beta"].get<double>(), 10.0);
}

TEST(Cli, SimulationIsBitReproducible)
{
    const auto dir = fresh_dir("repro");
    const std::string args = "simulate --extent 150 --route 60 --packets 5 --slots 800 --seed 9 --out ";
    ASSERT_EQ(cli(args + (dir / "a.csv").string()).code, 0);
    ASSERT_EQ(cli(args + (dir / "b.csv").string()).code, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_EQ(slurp(dir / "a.csv.json"), slurp(dir / "b.csv.json"));
    EXPECT_GT(lines(slurp(dir / "a.csv")).size(), 5u);
    const auto other = cli("simulate --extent 150 --route 60 --packets 5 --slots 800 --seed 10 --out -");
    EXPECT_NE(other.out, slurp(dir / "a.csv"));
    fs::remove_all(dir);
}

TEST(Cli, SweepRowsFollowValueOrderAndMatchSingleRuns)
{
    const auto sweep = lines(cli("grid-range --extent 250 --sweep beta --values 100,1,10 --out -").out);
    ASSERT_EQ(sweep.size(), 4u);
    EXPECT_EQ(sweep[0].substr(0, 13), "beta,pattern,");
    const auto rows = json::parse(cli("grid-range --extent 250 --sweep beta --values 100,1,10 --format json --out -").out);
    ASSERT_EQ(rows.size(), 3u);
    const std::vector<std::string> betas{"100", "1", "10"};
    for (std::size_t k = 0; k < betas.size(); ++k) {
        const auto single = json::parse(cli("grid-range --extent 250 --format json --beta " + betas[k] + " --out -").out);
        EXPECT_EQ(rows[k], single) << betas[k];
    }
    const auto logs = lines(cli("optimize --format csv --sweep alpha --values log:3:12:3 --out -").out);
    ASSERT_EQ(logs.size(), 4u);
    EXPECT_EQ(logs[1].substr(0, 2), "3,");
    EXPECT_EQ(logs[2].substr(0, 2), "6,");
    EXPECT_EQ(logs[3].substr(0, 3), "12,");
}

TEST(Cli, EmptySweepIsANoOp)
{
    const auto dir = fresh_dir("empty");
    const auto r = cli("grid-range --sweep beta --values ''", "MACGEO_OUTPUT_DIR=" + dir.string());
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(fs::is_empty(dir));
    fs::remove_all(dir);
}

TEST(Cli, DefaultOutputGoesToEnvironmentDirectory)
{
    const auto dir = fresh_dir("env");
    const auto r = cli("asympt-alpha", "MACGEO_OUTPUT_DIR=" + (dir / "sub").string());
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("asympt-alpha"), std::string::npos);
    EXPECT_EQ(lines(r.out).size(), 1u);
    EXPECT_EQ(header(slurp(dir / "sub" / "asympt-alpha.csv")), "pattern,k1_over_k2,value");
    fs::remove_all(dir);
}

TEST(Cli, TraceWritesSidecar)
{
    const auto dir = fresh_dir("trace");
    ASSERT_EQ(cli("trace --extent 250 --out " + (dir / "t.csv").string()).code, 0);
    const auto side = json::parse(slurp(dir / "t.csv.json"));
    EXPECT_EQ(side["vertices"].get<std::size_t>() + 1, lines(slurp(dir / "t.csv")).size());
    EXPECT_NEAR(side["r1"].get<double>(), 0.3336, 5e-4);
    fs::remove_all(dir);
}

TEST(Cli, ConfigFileSuppliesDefaultsAndFlagsWin)
{
    const auto dir = fresh_dir("config");
    {
        std::ofstream cfg(dir / "c.json");
        cfg << R"({"command": "optimize", "beta": 100, "alpha": 3, "format": "json"})";
    }
    const auto base = json::parse(cli("--config " + (dir / "c.json").string() + " --out -").out);
    EXPECT_EQ(base["beta"].get<double>(), 100.0);
    EXPECT_EQ(base["alpha"].get<double>(), 3.0);
    const auto over = json::parse(cli("optimize --config " + (dir / "c.json").string() + " --beta 1000 --out -").out);
    EXPECT_EQ(over["beta"].get<double>(), 1000.0);
    EXPECT_EQ(over["alpha"].get<double>(), 3.0);
    {
        std::ofstream cfg(dir / "bad.json");
        cfg << R"({"no-such-flag": 1})";
    }
    EXPECT_EQ(cli("optimize --config " + (dir / "bad.json").string() + " --out -").code, 3);
    EXPECT_EQ(cli("optimize --config " + (dir / "missing.json").string()).code, 3);
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(cli("no-such-command").code, 2);
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("grid-range --beta -1 --out -").code, 3);
    EXPECT_EQ(cli("grid-range --beta notanumber --out -").code, 3);
    EXPECT_EQ(cli("grid-range --unknown-flag 1 --out -").code, 3);
    EXPECT_EQ(cli("grid-range --pattern square --k1 2 --out -").code, 3);
    EXPECT_EQ(cli("grid-range --sweep pattern --values 1 --out -").code, 3);
    EXPECT_EQ(cli("grid-range --sweep beta --values 1,x --out -").code, 3);
    EXPECT_EQ(cli("optimize --format xml --out -").code, 3);
    EXPECT_EQ(cli("asympt-beta --alpha 2 --out -").code, 5);
    EXPECT_EQ(cli("simulate --fading log-uniform:1 --extent 150 --route 60 --out -").code, 5);

    const auto dir = fresh_dir("exit");
    {
        std::ofstream blocker(dir / "file");
        blocker << "x";
    }
    EXPECT_EQ(cli("optimize --out " + (dir / "file" / "o.json").string()).code, 4);
    fs::remove_all(dir);
}
