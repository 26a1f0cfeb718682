#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "mrf/bloch.hpp"
#include "mrf/design.hpp"
#include "mrf/schedule_io.hpp"

// End-to-end checks of the command-line surface: exit codes, artifact
// formats, and a golden-file regression. The binary path comes from the
// MRF_CLI environment variable (set by ctest).

using namespace mrf;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("MRF_CLI");
    REQUIRE_MESSAGE(p != nullptr, "MRF_CLI must point at the mrfdesign binary");
    return p;
}

std::string fixtures_path() {
    const char* p = std::getenv("MRF_FIXTURES");
    REQUIRE_MESSAGE(p != nullptr, "MRF_FIXTURES must point at tests/fixtures");
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

fs::path make_temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("mrf_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path);
    os << content;
}

std::vector<std::string> data_lines(const fs::path& path) {
    std::ifstream is(path);
    REQUIRE_MESSAGE(is.good(), "missing " << path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#')
            lines.push_back(line);
    return lines;
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream is(path);
    REQUIRE_MESSAGE(is.good(), "missing " << path.string());
    nlohmann::json j;
    is >> j;
    return j;
}

const std::string kMinimalConfig = R"({"version": 1})";

} // namespace

TEST_CASE("cli: validation, numerical and io errors use distinct exit codes") {
    const fs::path dir = make_temp_dir("errors");
    const fs::path cfg = dir / "config.json";
    write_file(cfg, kMinimalConfig);

    SUBCASE("unknown config key") {
        const fs::path bad = dir / "bad.json";
        write_file(bad, R"({"version": 1, "blochh": {}})");
        CHECK(run_cli("crb --config " + bad.string() + " --schedule none.csv") == 2);
    }
    SUBCASE("unsupported config version") {
        const fs::path bad = dir / "badv.json";
        write_file(bad, R"({"version": 99})");
        CHECK(run_cli("crb --config " + bad.string() + " --schedule none.csv") == 2);
    }
    SUBCASE("missing schedule file") {
        CHECK(run_cli("crb --config " + cfg.string() + " --schedule " +
                      (dir / "nope.csv").string()) == 4);
    }
    SUBCASE("zero-flip schedule is singular information") {
        AcqSchedule zeros;
        for (int i = 0; i < 10; ++i)
            zeros.entries.push_back({0.0, 0.0, 2.0, 12.0});
        const fs::path sched = dir / "zeros.csv";
        write_schedule_csv(zeros, sched.string());
        write_file(dir / "fast.json",
                   R"({"version": 1, "bloch": {"nv": 8}})");
        CHECK(run_cli("crb --config " + (dir / "fast.json").string() + " --schedule " +
                      sched.string() + " --out " + dir.string()) == 3);
    }
    SUBCASE("missing subcommand is a usage error") {
        CHECK(run_cli("--config " + cfg.string()) == 2);
    }
}

TEST_CASE("cli simulate: row counts and the golden-file regression") {
    const fs::path dir = make_temp_dir("simulate");
    const fs::path fixtures = fixtures_path();

    const int rc = run_cli("simulate --config " + (fixtures / "config_n50.json").string() +
                           " --schedule " + (fixtures / "schedule_conv_n50.csv").string() +
                           " --out " + dir.string());
    REQUIRE(rc == 0);

    const auto lines = data_lines(dir / "trajectories.csv");
    // header + 3 tissues x 50 rows
    CHECK(lines.size() == 1 + 3 * 50);
    CHECK(lines[0] == "tissue,n,mx,my,mag");

    // provenance comment leads every artifact
    std::ifstream raw(dir / "trajectories.csv");
    std::string first;
    std::getline(raw, first);
    CHECK(first.rfind("# tool=mrfdesign version=", 0) == 0);
    CHECK(first.find("config_hash=") != std::string::npos);
    CHECK(first.find("seed=") != std::string::npos);

    const auto golden = data_lines(fs::path(fixtures) / "golden_trajectories_n50.csv");
    REQUIRE(lines.size() == golden.size());
    for (std::size_t i = 0; i < lines.size(); ++i)
        CHECK(lines[i] == golden[i]);

    // per-tissue machine-readable signals exist
    CHECK(data_lines(dir / "signal_t0.csv").size() == 1 + 50);
}

TEST_CASE("cli simulate: a zero-flip schedule yields an all-zero magnitude column") {
    const fs::path dir = make_temp_dir("simulate0");
    AcqSchedule zeros;
    for (int i = 0; i < 8; ++i)
        zeros.entries.push_back({0.0, 0.0, 2.0, 12.0});
    write_schedule_csv(zeros, (dir / "zeros.csv").string());
    write_file(dir / "cfg.json", R"({"version": 1, "bloch": {"nv": 8}})");
    REQUIRE(run_cli("simulate --config " + (dir / "cfg.json").string() + " --schedule " +
                    (dir / "zeros.csv").string() + " --out " + dir.string()) == 0);
    for (const auto& line : data_lines(dir / "trajectories.csv")) {
        if (line.rfind("tissue", 0) == 0)
            continue;
        const auto pos = line.rfind(',');
        CHECK(std::stod(line.substr(pos + 1)) == 0.0);
    }
}

TEST_CASE("cli design: artifacts, monotone history, feasibility") {
    const fs::path dir = make_temp_dir("design");
    write_file(dir / "cfg.json",
               R"({"version": 1,
                   "design": {"n": 12, "max_iter": 6, "nv_design": 8}})");
    REQUIRE(run_cli("design --config " + (dir / "cfg.json").string() +
                    " --mode opt2 --seed 3 --out " + dir.string()) == 0);

    const auto history = data_lines(dir / "cost_history.csv");
    REQUIRE(history.size() >= 2);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < history.size(); ++i) {
        const double cost = std::stod(history[i].substr(history[i].find(',') + 1));
        CHECK(cost <= prev);
        prev = cost;
    }

    const AcqSchedule out = read_schedule_csv((dir / "schedule_opt2.csv").string());
    DesignConfig dc = default_design_config(12);
    dc.delta_alpha_max = 1.0 * M_PI / 180.0;
    CHECK(check_constraints(out, dc).empty());

    const auto summary = read_json(dir / "design_result.json");
    CHECK(summary["mode"] == "opt2");
    CHECK(summary.contains("tr_bound_fraction"));
    CHECK(summary["provenance"].contains("config_hash"));
    CHECK(double(summary["final_cost"]) <= double(summary["initial_cost"]));
}

TEST_CASE("cli dict + match: a clean atom signal is recovered exactly") {
    const fs::path dir = make_temp_dir("dictmatch");
    write_file(dir / "cfg.json",
               R"({"version": 1,
                   "bloch": {"nv": 8},
                   "dictionary": {"t1_segments": [[600, 800, 20]],
                                   "t2_segments": [[40, 80, 4]]}})");
    const auto schedule = conventional_schedule(30, 6);
    write_schedule_csv(schedule, (dir / "sched.csv").string());

    REQUIRE(run_cli("dict --config " + (dir / "cfg.json").string() + " --schedule " +
                    (dir / "sched.csv").string() + " --out " + dir.string()) == 0);
    REQUIRE(fs::exists(dir / "dictionary.bin"));
    REQUIRE(fs::exists(dir / "dictionary.bin.json"));

    // Clean scaled signal from one grid atom.
    const auto traj = simulate(schedule, {700.0, 64.0, 0.85}, uniform_ensemble(8));
    std::ostringstream sig;
    sig << "n,mx,my\n" << std::setprecision(17);
    for (Eigen::Index n = 0; n < traj.size(); ++n)
        sig << (n + 1) << ',' << traj.samples(0, n) << ',' << traj.samples(1, n) << "\n";
    write_file(dir / "signal.csv", sig.str());

    REQUIRE(run_cli("match --config " + (dir / "cfg.json").string() + " --dict " +
                    (dir / "dictionary.bin").string() + " --signal " +
                    (dir / "signal.csv").string() + " --out " + dir.string()) == 0);
    const auto est = read_json(dir / "estimate.json");
    CHECK(double(est["t1_ms"]) == 700.0);
    CHECK(double(est["t2_ms"]) == 64.0);
    CHECK(double(est["m0"]) == doctest::Approx(0.85).epsilon(1e-10));
}

TEST_CASE("cli mc: summary satisfies the decomposition identity") {
    const fs::path dir = make_temp_dir("mc");
    write_file(dir / "cfg.json",
               R"({"version": 1,
                   "bloch": {"nv": 8},
                   "dictionary": {"t1_segments": [[680, 720, 5]],
                                   "t2_segments": [[55, 65, 1]]},
                   "mc": {"trials": 20, "seed": 7, "snr_db": 30}})");
    const auto schedule = conventional_schedule(40, 6);
    write_schedule_csv(schedule, (dir / "sched.csv").string());
    REQUIRE(run_cli("dict --config " + (dir / "cfg.json").string() + " --schedule " +
                    (dir / "sched.csv").string() + " --out " + dir.string()) == 0);
    REQUIRE(run_cli("mc --config " + (dir / "cfg.json").string() + " --schedule " +
                    (dir / "sched.csv").string() + " --dict " +
                    (dir / "dictionary.bin").string() + " --out " + dir.string()) == 0);

    const auto res = read_json(dir / "mc_result.json");
    CHECK(res["trials"] == 20);
    for (int p = 0; p < 3; ++p) {
        const double nrmse = res["nrmse"][p];
        const double nbias = res["nbias"][p];
        const double nstd = res["nstd"][p];
        CHECK(nrmse * nrmse ==
              doctest::Approx(nbias * nbias + nstd * nstd).epsilon(1e-10));
    }
}

TEST_CASE("cli sweep: one row per schedule") {
    const fs::path dir = make_temp_dir("sweep");
    write_file(dir / "cfg.json", R"({"version": 1, "bloch": {"nv": 8}})");
    write_schedule_csv(conventional_schedule(30, 1), (dir / "a.csv").string());
    write_schedule_csv(conventional_schedule(50, 1), (dir / "b.csv").string());
    REQUIRE(run_cli("sweep --config " + (dir / "cfg.json").string() + " --schedule " +
                    (dir / "a.csv").string() + " --schedule " + (dir / "b.csv").string() +
                    " --out " + dir.string()) == 0);
    const auto lines = data_lines(dir / "ncrb_sweep.csv");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "label,n,ncrb_t1,ncrb_t2,ncrb_m0");
    CHECK(lines[1].rfind("a,30,", 0) == 0);
    CHECK(lines[2].rfind("b,50,", 0) == 0);
}
