#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "fixtures.hpp"

using namespace scoremix;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "scoremix");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("scoremix_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string data(const std::string& file) { return std::string(SCOREMIX_DATA_DIR) + "/" + file; }

std::vector<std::string> line_args() { return {"--a1", data("line_first.csv"), "--a2", data("line_second.csv")}; }

std::vector<std::string> join(std::vector<std::string> a, std::initializer_list<std::string> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        rows.push_back(row);
    }
    return rows;
}

std::vector<std::pair<std::string, std::string>> dir_contents(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fs::directory_iterator(dir)) out.emplace_back(e.path().filename().string(), read_file(e.path().string()));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Io, GitBlobHash) {
    EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Io, TrajectoryCsvRoundTrip) {
    const MixedScoreModel m(datasets::plane_first(), datasets::plane_second(), 0.5);
    IntegratorConfig cfg;
    cfg.tau_max = 1.0;
    const auto tr = simulate_similarity_ode(m, datasets::vec2(0.1, 0.2), cfg);
    const fs::path p = fresh_dir("csv") / "t.csv";
    std::ostringstream csv;
    write_trajectory_csv(csv, tr);
    write_text(p, csv.str());
    const auto rows = read_csv_rows(p);
    ASSERT_EQ(rows.size(), tr.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ASSERT_EQ(rows[i].size(), 4u);
        EXPECT_EQ(rows[i][0], tr.times[i]);
        EXPECT_EQ(rows[i][1], tr.states[i][0]);
        EXPECT_EQ(rows[i][2], tr.states[i][1]);
        EXPECT_EQ(rows[i][3], tr.drift_norm_sq[i]);
    }
}

TEST(Io, RecordJsonKeepsValues) {
    const MixedScoreModel m(datasets::line_first(), datasets::line_second(), 2.0);
    const auto res = enumerate_critical_points(m);
    const auto j = nlohmann::json::parse(to_json(res).dump());
    ASSERT_EQ(j["records"].size(), res.records.size());
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        EXPECT_EQ(j["records"][i]["x_star"][0].get<double>(), res.records[i].x_star[0]);
        EXPECT_EQ(j["records"][i]["classification"], to_string(res.records[i].classification));
    }
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli({}).code, 2);
    EXPECT_EQ(run_cli({"bogus"}).code, 2);
    EXPECT_EQ(run_cli(join(line_args(), {"simulate", "--nope"})).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--x0", "0.1"}).code, 2);
    EXPECT_EQ(run_cli(join({"verify"}, {"--dataset", "line", "--suite", ""})).code, 2);
    EXPECT_EQ(run_cli(join({"verify"}, {"--dataset", "line"})).code, 2);
    EXPECT_EQ(run_cli(join({"verify"}, {"--dataset", "line", "--suite", "bogus"})).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--a1", data("missing.csv"), "--a2", data("line_second.csv"), "--x0", "0"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--dataset", "line", "--x0", "0,1"}).code, 2);
    EXPECT_EQ(run_cli({"simulate", "--dataset", "line", "--mode", "warp", "--x0", "0"}).code, 2);
    EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, PotentialRejectsHighDimension) {
    const fs::path dir = fresh_dir("pot3");
    write_text(dir / "a.csv", "1,2,3\n0,0,0\n");
    const auto r = run_cli({"potential", "--a1", (dir / "a.csv").string(), "--a2", (dir / "a.csv").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, SimulateOdeReachesInterfaceAndWritesSidecar) {
    const fs::path dir = fresh_dir("ode");
    const auto r = run_cli(join({"simulate"}, {"--mode", "ode", "--lambda", "2", "--a1", data("line_first.csv"), "--a2",
                                               data("line_second.csv"), "--x0", "0.9", "--out", dir.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv_rows(dir / "trajectory_0000.csv");
    EXPECT_NEAR(rows.back()[1], 0.75, 1e-2);
    const auto meta = nlohmann::json::parse(read_file((dir / "metadata.json").string()));
    EXPECT_EQ(meta["config"]["lambda"], 2);
    EXPECT_EQ(meta["config"]["mode"], "ode");
    EXPECT_EQ(meta["inputs"]["a1_sha1"], git_blob_sha1(read_file(data("line_first.csv"))));
    EXPECT_EQ(meta["inputs"]["a2_sha1"], git_blob_sha1(read_file(data("line_second.csv"))));
}

TEST(Cli, ZeroNoiseSdeMatchesOdeOutput) {
    const fs::path a = fresh_dir("sde0"), b = fresh_dir("ode0");
    auto base = join(line_args(), {"--lambda", "2", "--x0", "0.9"});
    std::vector<std::string> sde{"simulate", "--mode", "sde", "--eps", "0", "--seed", "7", "--out", a.string()};
    std::vector<std::string> ode{"simulate", "--mode", "ode", "--out", b.string()};
    sde.insert(sde.end(), base.begin(), base.end());
    ode.insert(ode.end(), base.begin(), base.end());
    ASSERT_EQ(run_cli(sde).code, 0);
    ASSERT_EQ(run_cli(ode).code, 0);
    EXPECT_EQ(read_file((a / "trajectory_0000.csv").string()), read_file((b / "trajectory_0000.csv").string()));
}

TEST(Cli, RerunIsByteIdentical) {
    const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
    auto args = [&](const fs::path& out) {
        return std::vector<std::string>{"simulate", "--dataset", "line", "--mode", "sde", "--eps", "0.2", "--lambda", "0.5",
                                        "--n-paths", "5", "--seed", "3", "--out", out.string()};
    };
    ASSERT_EQ(run_cli(args(a)).code, 0);
    ASSERT_EQ(run_cli(args(b)).code, 0);
    auto ca = dir_contents(a), cb = dir_contents(b);
    ASSERT_EQ(ca.size(), 6u);
    for (std::size_t i = 0; i < ca.size(); ++i) {
        EXPECT_EQ(ca[i].first, cb[i].first);
        if (ca[i].first != "metadata.json") EXPECT_EQ(ca[i].second, cb[i].second) << ca[i].first;
    }
    // metadata differs only through the echoed output directory
    ASSERT_EQ(ca.front().first, "metadata.json");
    auto ma = nlohmann::json::parse(ca.front().second), mb = nlohmann::json::parse(cb.front().second);
    ma["config"].erase("out");
    mb["config"].erase("out");
    EXPECT_EQ(ma, mb);
}

TEST(Cli, LimitGridClustersMatchEnumeration) {
    const fs::path dir = fresh_dir("limit");
    const auto r = run_cli(join({"simulate", "--mode", "limit", "--z0-grid", "20", "--lambda", "0.5", "--out", dir.string()}, {"--dataset", "line"}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto meta = nlohmann::json::parse(read_file((dir / "metadata.json").string()));
    EXPECT_EQ(meta["trajectories"].size(), 20u);
    const auto mins = enumerate_critical_points(MixedScoreModel(datasets::line_first(), datasets::line_second(), 0.5)).minimizers();
    std::size_t total = 0;
    for (const auto& c : meta["limit_clusters"]) {
        const double x = c["center"][0].get<double>();
        total += c["count"].get<std::size_t>();
        EXPECT_TRUE(std::any_of(mins.begin(), mins.end(), [&](const auto& rec) { return std::abs(rec.x_star[0] - x) < 1e-3; })) << x;
    }
    EXPECT_EQ(total, 20u);
}

TEST(Cli, PotentialGridOfDiracIsParaboloid) {
    const fs::path dir = fresh_dir("dirac");
    write_text(dir / "a.csv", "x0,x1\n0.5,-1\n");
    const auto r = run_cli({"potential", "--a1", (dir / "a.csv").string(), "--a2", (dir / "a.csv").string(), "--lambda", "0.3",
                            "--res", "11", "--lower", "-2,-2", "--upper", "2,2", "--out", (dir / "o").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = read_csv_rows(dir / "o" / "potential.csv");
    ASSERT_EQ(rows.size(), 121u);
    for (const auto& row : rows) {
        const double expect = (row[0] - 0.5) * (row[0] - 0.5) + (row[1] + 1) * (row[1] + 1);
        EXPECT_NEAR(row[2], expect, 1e-12);
        EXPECT_EQ(row[4], 0.0);
        EXPECT_NEAR(row[6], -0.5 * (row[0] - 0.5), 1e-12);
    }
}

TEST(Cli, MinimizersSweep) {
    const fs::path dir = fresh_dir("mins");
    std::vector<std::string> args{"minimizers", "--lambda", "0,0.5,1", "--sweep-csv", "sweep.csv", "--out", dir.string()};
    for (const auto& a : line_args()) args.push_back(a);
    const auto ok = run_cli(args);
    ASSERT_EQ(ok.code, 0) << ok.err;
    const auto j = nlohmann::json::parse(read_file((dir / "minimizers.json").string()));
    ASSERT_EQ(j.size(), 3u);
    std::vector<double> at_one;
    for (const auto& rec : j[2]["records"]) {
        if (rec["classification"] != "saddle_candidate") at_one.push_back(rec["x_star"][0].get<double>());
    }
    std::sort(at_one.begin(), at_one.end());
    EXPECT_EQ(at_one, (std::vector<double>{-1.0, 1.0, 2.0}));
    EXPECT_EQ(read_csv_rows(dir / "sweep.csv").size(), 3u + 5u + 3u);
}

TEST(Cli, VerifyExpectedFailureFixturePasses) {
    const fs::path dir = fresh_dir("verify");
    const auto r = run_cli({"verify", "--dataset", "line", "--suite", "semiconcavity,hj,energy", "--lambda", "2", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err << r.out;
    const auto rep = nlohmann::json::parse(read_file((dir / "report_semiconcavity.json").string()));
    EXPECT_TRUE(rep["pass"].get<bool>());
    EXPECT_TRUE(rep["reports"][0]["expected_failure"].get<bool>());
    EXPECT_TRUE(fs::exists(dir / "report_hj.json"));
    EXPECT_TRUE(fs::exists(dir / "metadata.json"));
}

TEST(Cli, JsonConfigReplacesFlags) {
    const fs::path dir = fresh_dir("config");
    nlohmann::json cfg = {{"mode", "ode"}, {"lambda", 2},          {"x0", {0.9}},
                          {"a1", data("line_first.csv")}, {"a2", data("line_second.csv")}, {"out", (dir / "o").string()}};
    write_text(dir / "run.json", cfg.dump());
    const auto r = run_cli({"simulate", "--config", (dir / "run.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "o" / "trajectory_0000.csv"));
    // the echoed config reproduces the run
    const auto meta = nlohmann::json::parse(read_file((dir / "o" / "metadata.json").string()));
    write_text(dir / "echo.json", meta["config"].dump());
    EXPECT_EQ(run_cli({"simulate", "--config", (dir / "echo.json").string()}).code, 0);
    cfg["unknown_key"] = 1;
    write_text(dir / "bad.json", cfg.dump());
    EXPECT_EQ(run_cli({"simulate", "--config", (dir / "bad.json").string()}).code, 2);
}
