// End-to-end checks of the mpsts executable.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mpsts/io.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
    Json json() const { return Json::parse(out); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("mpsts_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path in_work(const std::string& name) { return workdir() / name; }

Run run_cli(const std::string& args) {
    const fs::path out = in_work("stdout.txt"), err = in_work("stderr.txt");
    const std::string cmd = std::string(MPSTS_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

const fs::path& canonical_histogram() {
    static const fs::path p = [] {
        const fs::path f = in_work("canonical.tsv");
        REQUIRE(run_cli("simulate photocount --n 58623 --seed 1 --out " + f.string()).code == 0);
        return f;
    }();
    return p;
}

}  // namespace

TEST_CASE("simulate photocount writes the requested number of events") {
    const auto hist = mpsts::io::read_histogram(canonical_histogram());
    CHECK(hist.total() == 58623);
}

TEST_CASE("simulate quadrature writes one reading per event") {
    const fs::path f = in_work("q_full.tsv");
    const Run r = run_cli("simulate quadrature --n 138710 --seed 1 --out " + f.string());
    REQUIRE(r.code == 0);
    CHECK(mpsts::io::read_quadratures(f).size() == 138710);
    CHECK(r.json()["result"]["events"] == 138710);
}

TEST_CASE("usage errors") {
    CHECK(run_cli("simulate photocount --n 0 --out " + in_work("x.tsv").string()).code != 0);
    CHECK(run_cli("simulate photocount --out " + in_work("x.tsv").string()).code != 0);
    CHECK(run_cli("fit photocount " + in_work("missing.tsv").string()).code != 0);
    CHECK(run_cli("fit photocount " + canonical_histogram().string() + " --prior fixed:").code == 1);
    CHECK(run_cli("fit photocount " + canonical_histogram().string() + " --prior sometimes").code == 1);
    CHECK(run_cli("frobnicate").code != 0);
}

TEST_CASE("identical command lines give identical reports and files") {
    const fs::path a = in_work("rep_a.tsv"), b = in_work("rep_b.tsv");
    const Run ra = run_cli("simulate photocount --n 5000 --seed 9 --out " + a.string());
    const Run rb = run_cli("simulate photocount --n 5000 --seed 9 --out " + b.string());
    REQUIRE(ra.code == 0);
    CHECK(slurp(a) == slurp(b));
    Json ja = ra.json(), jb = rb.json();
    CHECK(ja["output"]["digest"] == jb["output"]["digest"]);
    CHECK(run_cli("fit photocount " + a.string()).out == run_cli("fit photocount " + a.string()).out);
    CHECK_FALSE(ja.contains("wall_clock_seconds"));
    CHECK(run_cli("simulate photocount --n 10 --timing --out " + a.string()).json().contains("wall_clock_seconds"));
}

TEST_CASE("Bayesian fit of canonical photocounts") {
    const Run r = run_cli("fit photocount " + canonical_histogram().string());
    REQUIRE(r.code == 0);
    const Json j = r.json();
    CHECK(j["status"] == "ok");
    CHECK(j["estimates"]["delta"].get<double>() <= 0.015);
    const double fisher = j["information"]["fisher"]["condition_number"];
    const double posterior = j["information"]["posterior"]["condition_number"];
    CHECK(fisher > 2e6);
    CHECK(fisher < 2e7);
    CHECK(posterior > 300);
    CHECK(posterior < 1500);
    for (const char* p : {"m", "M", "mu0"}) CHECK(j["estimates"][p]["varied"] == true);
    CHECK(j["input"]["digest"].get<std::string>().rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("fixed-m fit reduces the free set") {
    const Run r = run_cli("fit photocount " + canonical_histogram().string() + " --prior fixed:m=2,K=3");
    REQUIRE(r.code == 0);
    const Json j = r.json();
    CHECK(j["estimates"]["m"]["varied"] == false);
    CHECK(j["estimates"]["K"]["varied"] == false);
    CHECK(j["information"]["fisher"]["order"] == Json::array({"M", "mu0"}));
    CHECK(std::abs(j["estimates"]["mu0"]["mean"].get<double>() - 0.264) < 3 * j["estimates"]["mu0"]["sd"].get<double>());
}

TEST_CASE("no-prior fit on a tiny sample reports wide marginals") {
    const fs::path f = in_work("tiny.tsv");
    REQUIRE(run_cli("simulate photocount --n 100 --seed 2 --out " + f.string()).code == 0);
    const Run r = run_cli("fit photocount " + f.string() + " --prior none --grid-nodes 21 --allow-boundary");
    REQUIRE(r.code == 0);
    const Json j = r.json();
    CHECK(j["estimates"]["delta"].get<double>() > 0.5);
    CHECK(j["estimates"]["K"]["varied"] == true);
}

TEST_CASE("a maximum on the grid edge escalates to a nonzero exit") {
    const std::string base = "fit photocount " + canonical_histogram().string() +
                             " --prior fixed:m=2,M=3,K=3 --mu0-range 0.20:0.25 --grid-nodes 11";
    const Run strict = run_cli(base);
    CHECK(strict.code == 3);
    CHECK(strict.json()["status"] == "warning");
    CHECK(strict.err.find("boundary") != std::string::npos);
    const Run relaxed = run_cli(base + " --allow-boundary");
    CHECK(relaxed.code == 0);
    CHECK(relaxed.json()["warnings"].size() == 1);
}

TEST_CASE("grid dump has one row per node") {
    const fs::path dump = in_work("grid.tsv");
    const Run r = run_cli("fit photocount " + canonical_histogram().string() +
                        " --prior fixed:m=2,M=3,K=3 --grid-nodes 17 --dump-grid " + dump.string());
    REQUIRE(r.code == 0);
    std::ifstream in(dump);
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 17);
}

TEST_CASE("fixed m=1 on quadratures gives a two-parameter report") {
    const fs::path f = in_work("q_small.tsv");
    REQUIRE(run_cli("simulate quadrature --n 20000 --seed 5 --out " + f.string()).code == 0);
    const Run r = run_cli("fit quadrature " + f.string() + " --prior fixed:m=1 --grid-nodes 31");
    REQUIRE(r.code == 0);
    const Json j = r.json();
    CHECK(j["estimates"]["m"]["varied"] == false);
    CHECK(j["estimates"]["K"]["varied"] == false);
    CHECK(j["estimates"]["M"]["varied"] == true);
    CHECK(j["estimates"]["mu0"]["varied"] == true);
    CHECK(j["information"]["fisher"]["order"] == Json::array({"M", "mu0"}));
    CHECK(run_cli("fit quadrature " + f.string() + " --prior fixed:m=2").code == 1);
}

TEST_CASE("pipeline on a synthetic trace") {
    const fs::path trace = in_work("trace.tsv"), out = in_work("pipe");
    REQUIRE(run_cli("simulate trace --duration 10 --seed 4 --out " + trace.string()).code == 0);
    const Run r = run_cli("pipeline " + trace.string() + " --out " + out.string());
    REQUIRE(r.code == 0);
    const Json j = r.json();
    CHECK(j["retained_fraction"].get<double>() == doctest::Approx(1.0 / 48).epsilon(0.01));
    REQUIRE(j["datasets"].size() >= 2);
    std::int64_t groups = 0;
    for (const auto& d : j["datasets"]) {
        const int K = d["K"];
        CHECK(fs::exists(out / ("photocounts_K" + std::to_string(K) + ".tsv")));
        CHECK(fs::exists(out / ("quadratures_K" + std::to_string(K) + ".tsv")));
        groups += d["groups"].get<std::int64_t>();
    }
    CHECK(groups == j["retained_bins"].get<std::int64_t>() / 3);

    SUBCASE("round trip recovers the generator mean within 3 sigma") {
        // effective per-bin mean once the tap detector conditions the field
        const double tap = 0.1, mu0 = 0.264;
        const double effective = mu0 / (1.0 + tap * 2.0 * mu0 / (1.0 - tap));
        const Run fit = run_cli("fit photocount " + (out / "photocounts_K0.tsv").string() +
                              " --prior fixed:m=2,M=3,K=0 --no-dark");
        REQUIRE(fit.code == 0);
        const Json e = fit.json()["estimates"]["mu0"];
        CHECK(std::abs(e["mean"].get<double>() - effective) < 3 * e["sd"].get<double>());
    }
}

TEST_CASE("pipeline without homodyne readings writes empty quadrature files") {
    const fs::path trace = in_work("trace_nohd.tsv"), out = in_work("pipe_nohd");
    REQUIRE(run_cli("simulate trace --duration 1 --seed 6 --no-homodyne --out " + trace.string()).code == 0);
    REQUIRE(run_cli("pipeline " + trace.string() + " --out " + out.string()).code == 0);
    CHECK(mpsts::io::read_quadratures(out / "quadratures_K0.tsv").empty());
    CHECK(mpsts::io::read_histogram(out / "photocounts_K0.tsv").total() > 0);
}

TEST_CASE("malformed trace line is reported with its line number") {
    const fs::path trace = in_work("bad_trace.tsv");
    {
        std::ofstream f(trace);
        f << "# mpsts-trace v1\n1e-6\tn\t1\n2e-6\tz\t1\n";
    }
    const Run r = run_cli("pipeline " + trace.string() + " --out " + in_work("pipe_bad").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("reproduce fig7 and fig4a") {
    const fs::path a = in_work("fig_a"), b = in_work("fig_b");
    const Run r = run_cli("reproduce fig7 --out " + a.string());
    REQUIRE(r.code == 0);
    const Json j = r.json();
    for (const char* p : {"m", "M", "mu0", "K"}) CHECK(j["overlaps"][p].get<double>() > 0.5);
    CHECK(j["K_mass_at_truth"].get<double>() > 0.99);
    REQUIRE(run_cli("reproduce fig7 --out " + b.string()).code == 0);
    CHECK(slurp(a / "fig7.tsv") == slurp(b / "fig7.tsv"));

    const Run f4 = run_cli("reproduce fig4a --out " + a.string());
    REQUIRE(f4.code == 0);
    CHECK(f4.json()["estimates"]["delta"].get<double>() <= 0.015);
    CHECK(fs::file_size(a / "fig4a.tsv") > 0);
}
