#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "cavcorr/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args)
{
    const std::string cmd = std::string(CAVCORR_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0)
        r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> v;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);)
        v.push_back(l);
    return v;
}

struct TempDir {
    fs::path dir;
    explicit TempDir(const std::string& name) : dir(fs::temp_directory_path() / ("cavcorr_cli_" + name))
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    std::string file(const std::string& f) const { return (dir / f).string(); }
};

const std::string grid_args = "--omega-sigma 0.5,1 --rho0-sigma 0.5:2:4 --sigma-r 0.1";

}  // namespace

TEST_CASE("point: JSON by default, all outputs finite")
{
    const auto r = run("point --omega-sigma 1 --rho0-sigma 1 --sigma-r 0.1 --lambda 0.1");
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    for (const auto& c : j["provenance"]["converged"])
        CHECK(c == true);
    for (const char* k : {"x_aa", "x_bb", "x_ab"})
        CHECK(std::isfinite(j["correlations"][k].get<double>()));
    for (const auto& [k, v] : j["measures"].items())
        if (v.is_number())
            CHECK(std::isfinite(v.get<double>()));
}

TEST_CASE("point: CSV on request")
{
    const auto r = run("point --format csv --omega-sigma 1 --rho0-sigma 1 --sigma-r 0.1");
    REQUIRE(r.code == 0);
    const auto l = lines_of(r.out);
    REQUIRE(l.size() == 2);
    CHECK(l[0] == cavcorr::sweep::csv_header());
    CHECK(l[1].substr(l[1].size() - 4) == "1111");
}

TEST_CASE("validation errors exit with 2")
{
    CHECK(run("point --omega-sigma 1 --rho0-sigma 10 --sigma-r 0.1").code == 2);
    CHECK(run("point --omega-sigma 1 --rho0-sigma 12 --sigma-r 0.1").code == 2);
    CHECK(run("point --omega-sigma 1 --rho0-sigma 1 --sigma-r 0.1 --format xml").code == 2);
    CHECK(run("point --lambda banana").code == 2);
    CHECK(run("").code == 2);
    TempDir t("empty");
    CHECK(run("sweep --omega-sigma 1 --rho0-sigma 20,30 --sigma-r 0.1 --out " + t.file("x.csv")).code == 2);
    CHECK_FALSE(fs::exists(t.file("x.csv.partial")));
}

TEST_CASE("unconverged point exits 1 unless allowed")
{
    const std::string a = "point --omega-sigma 1 --rho0-sigma 1 --sigma-r 0.005 --nmax-m 50";
    CHECK(run(a).code == 1);
    const auto r = run(a + " --allow-unconverged");
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["provenance"]["converged"]["m_ab"] == false);
}

TEST_CASE("lambda 0.2 against 0.1 scales the X entries by exactly 4")
{
    const std::string a = "point --omega-sigma 0.7 --rho0-sigma 1.5 --sigma-r 0.1";
    const auto lo = json::parse(run(a + " --lambda 0.1").out)["correlations"];
    const auto hi = json::parse(run(a + " --lambda 0.2").out)["correlations"];
    for (const char* k : {"x_aa", "x_bb", "x_ab"})
        CHECK(hi[k].get<double>() == 4.0 * lo[k].get<double>());
}

TEST_CASE("config file, flags win")
{
    TempDir t("config");
    {
        std::ofstream c(t.file("run.cfg"));
        c << "omega-sigma=1\nrho0-sigma=1\nsigma-r=0.1\nlambda=0.2\n";
    }
    const auto cfg = json::parse(run("--config " + t.file("run.cfg") + " point").out);
    CHECK(cfg["provenance"]["parameters"]["lambda"] == 0.2);
    const auto over = json::parse(run("--config " + t.file("run.cfg") + " point --lambda 0.1").out);
    CHECK(over["provenance"]["parameters"]["lambda"] == 0.1);
}

TEST_CASE("sweep: thread count does not change the bytes")
{
    TempDir t("threads");
    REQUIRE(run("sweep " + grid_args + " --threads 1 --out " + t.file("a.csv")).code == 0);
    REQUIRE(run("sweep " + grid_args + " --threads 8 --out " + t.file("b.csv")).code == 0);
    const std::string a = slurp(t.file("a.csv"));
    CHECK(a == slurp(t.file("b.csv")));
    const auto l = lines_of(a);
    CHECK(l.size() == 9);
    for (std::size_t i = 1; i < l.size(); ++i) {
        const auto p = cavcorr::sweep::parse_csv_row(l[i]);
        CHECK(p.point.rho0_sigma * p.point.sigma_R < 1.0);
    }
}

TEST_CASE("sweep: interrupt and resume give the uninterrupted bytes")
{
    TempDir t("resume");
    REQUIRE(run("sweep " + grid_args + " --out " + t.file("ref.csv")).code == 0);
    CHECK(run("sweep " + grid_args + " --stop-after 5 --out " + t.file("r.csv")).code == 1);
    CHECK_FALSE(fs::exists(t.file("r.csv")));
    CHECK(lines_of(slurp(t.file("r.csv.partial"))).size() == 6);
    CHECK(run("sweep " + grid_args + " --resume --threads 2 --out " + t.file("r.csv")).code == 0);
    CHECK(slurp(t.file("r.csv")) == slurp(t.file("ref.csv")));
}

TEST_CASE("sweep: free-space overlay")
{
    TempDir t("overlay");
    REQUIRE(run("sweep --omega-sigma 1 --rho0-sigma 0.5:4:3 --sigma-r 0.1 "
                "--outputs negativity,freespace_boundary --out " +
                t.file("s.csv"))
                .code == 0);
    const auto l = lines_of(slurp(t.file("s.csv.freespace.csv")));
    REQUIRE(l.size() == 2);
    CHECK(l[0] == "omega_sigma,d_over_sigma_boundary,flag");
    CHECK(l[1].find("crossing") != std::string::npos);
}

TEST_CASE("density: contour and empty-contour flag")
{
    TempDir t("density");
    const auto r = run("density --omega-sigma 0.05:1:3:log --rho0-sigma 0.1:4:4:log --sigma-r 0.1 --out " +
                       t.file("d.csv"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("contour: ok") != std::string::npos);
    CHECK(lines_of(slurp(t.file("d.csv.contour.csv"))).size() > 1);
    const auto j = json::parse(slurp(t.file("d.csv.density.json")));
    CHECK(j["contour_flag"] == "ok");

    const auto far =
        run("density --omega-sigma 0.5,1 --rho0-sigma 6,9 --sigma-r 0.1 --out " + t.file("far.csv"));
    REQUIRE(far.code == 0);
    CHECK(far.out.find("contour: empty") != std::string::npos);
    CHECK(json::parse(slurp(t.file("far.csv.density.json")))["contour_flag"] == "empty");
    CHECK(lines_of(slurp(t.file("far.csv.contour.csv"))).size() == 1);

    CHECK(run("density --omega-sigma 1 --rho0-sigma 1,2 --sigma-r 0.1 --out " + t.file("bad.csv")).code == 2);
}

TEST_CASE("converge: trace columns and midpoint settling")
{
    TempDir t("converge");
    const auto r = run("converge --omega-sigma 1 --rho0-sigma 1 --sigma-r 0.1 --n-points 50 --out " + t.file("c.csv"));
    REQUIRE(r.code == 0);
    const auto l = lines_of(r.out);
    CHECK(l[0] == "n,partial_sum_re,partial_sum_im,rel_change,is_extremum,midpoint_estimate_re,midpoint_estimate_im");
    CHECK(l.size() >= 40);
    const auto s = json::parse(slurp(t.file("c.csv.summary.json")));
    CHECK(s["converged"] == true);
    CHECK(s["series"] == "m_ab");
    CHECK(s["terms_used"].get<int>() > 10);

    const auto x = run("converge --series x_aa --spacing lin --n-points 20 --omega-sigma 1 --rho0-sigma 1 "
                       "--sigma-r 0.1");
    REQUIRE(x.code == 0);
    CHECK(lines_of(x.out).size() == 21);
    CHECK(run("converge --series y --omega-sigma 1 --rho0-sigma 1 --sigma-r 0.1").code == 2);
}

TEST_CASE("modes: export, reload and first zero")
{
    TempDir t("modes");
    const auto r = run("modes --m-max 0 --n-max 1 --out " + t.file("z.txt"));
    REQUIRE(r.code == 0);
    const auto l = lines_of(slurp(t.file("z.txt")));
    std::string row;
    for (const auto& s : l)
        if (!s.empty() && s[0] != '#')
            row = s;
    std::istringstream is(row);
    int m = -1, n = -1;
    double z = 0.0;
    is >> m >> n >> z;
    CHECK(m == 0);
    CHECK(n == 1);
    CHECK(std::abs(z - 2.404825557695773) < 1e-14);
    CHECK(run("modes --m-max 3 --n-max 50 --out " + t.file("z2.txt")).code == 0);
    CHECK(run("modes --m-max 3 --n-max 50").code == 2);
}

TEST_CASE("freespace-boundary command")
{
    const auto r = run("freespace-boundary --omega-sigma 0.05,1 --rho0-sigma 0.1:20:50");
    REQUIRE(r.code == 0);
    const auto l = lines_of(r.out);
    REQUIRE(l.size() == 3);
    CHECK(l[2].find("crossing") != std::string::npos);
}
