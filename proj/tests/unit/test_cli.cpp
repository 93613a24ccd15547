#include <doctest.h>

#include "stressvar/cli.hpp"
#include "stressvar/errors.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace svar;
using namespace svar::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Lines of a CSV, comment lines dropped.
std::vector<std::string> csv_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

std::size_t columns(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

RunConfig small(const fs::path& dir) {
    RunConfig c;
    c.set("data.out", dir.string());
    c.set("data.funds", (dir / "funds.csv").string());
    c.set("data.factors", (dir / "factors.csv").string());
    c.set("synth.n_factors", "12");
    c.set("synth.n_funds", "10");
    c.set("synth.factor_months", "240");
    c.set("synth.fund_months", "60");
    c.set("synth.crash_factors", "3");
    c.set("synth.corr_pairs", "2");
    c.set("simulate.n_sims", "20");
    c.set("simulate.sub_n", "6");
    c.set("simulate.pick_n", "3");
    return c;
}

std::vector<fs::path> run_all(const RunConfig& c) {
    std::vector<fs::path> out;
    for (auto cmd : {cmd_synth, cmd_score, cmd_svar, cmd_backtest, cmd_allocate, cmd_simulate})
        for (auto& p : cmd(c)) out.push_back(p);
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("key registry") {
    std::set<std::string> names, aliases;
    for (const auto& k : keys()) {
        CHECK(names.insert(k.key).second);
        CHECK(k.key.find('.') != std::string::npos);
        CHECK_FALSE(k.doc.empty());
        if (!k.alias.empty()) {
            CHECK(aliases.insert(k.alias).second);
            CHECK(names.count(k.alias) == 0);
        }
    }
    const RunConfig c;
    for (const auto& k : keys()) CHECK(c.get(k.key) == k.fallback);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys and malformed values are rejected by name") {
    RunConfig c;
    CHECK_THROWS_AS(c.set("model.windw", "36"), ConfigError);
    CHECK_THROWS_AS(c.get("nope.key"), ConfigError);
    c.set("model.window", "abc");
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("model.window") != std::string::npos);
    }
    c.set("model.window", "12");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.set("model.q", "0.975");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.set("alloc.measures", "svar,es");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.set("run.kernels", "neon");
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("ini loading") {
    std::istringstream in(
        "# comment\n"
        "; another\n"
        "[model]\n"
        "window = 48\n"
        "q=0.95\n"
        "\n"
        "[run]\n"
        "  seed = 7  \n");
    RunConfig c;
    c.load_ini(in);
    CHECK(c.get("model.window") == "48");
    CHECK(c.get("model.q") == "0.95");
    CHECK(c.seed() == 7);

    std::istringstream bad("[model]\nwindw = 3\n");
    CHECK_THROWS_AS(RunConfig().load_ini(bad), ConfigError);
    std::istringstream orphan("window = 3\n");
    CHECK_THROWS_AS(RunConfig().load_ini(orphan), ConfigError);
    CHECK_THROWS_AS(RunConfig().load_ini(std::string("/nonexistent/x.ini")), Error);

    // resolved configuration reads back unchanged
    std::ostringstream dump;
    c.write_ini(dump);
    std::istringstream back(dump.str());
    RunConfig d;
    d.load_ini(back);
    for (const auto& k : keys()) CHECK(d.get(k.key) == c.get(k.key));
}

TEST_CASE("config hash and header") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.set("data.out", "elsewhere");
    b.set("run.workers", "4");
    CHECK(a.hash() == b.hash());
    b.set("model.window", "48");
    CHECK(a.hash() != b.hash());
    CHECK(a.header("svar") == "stressvar svar schema_version=1 config_hash=" + a.hash() + " seed=1");
}

TEST_CASE("exit codes") {
    CHECK(exit_code(ConfigError("x")) == 1);
    CHECK(exit_code(ParseError("x", 3)) == 2);
    CHECK(exit_code(IoError("x")) == 2);
    CHECK(exit_code(DomainError("x")) == 2);
    CHECK(exit_code(std::runtime_error("x")) == 2);
}

TEST_CASE("pipeline end to end") {
    TempDir tmp("stressvar_cli_e2e");
    const auto c = small(tmp.path);
    const auto files = run_all(c);
    CHECK(files.size() == 11);
    for (const auto& f : files) CHECK(fs::exists(f));

    const std::string head = "# stressvar synth schema_version=1 config_hash=" + c.hash() + " seed=1";
    CHECK(slurp(tmp.path / "funds.csv").rfind(head + "\n", 0) == 0);
    CHECK(csv_lines(tmp.path / "funds.csv").front() == "date,id,return");
    CHECK(csv_lines(tmp.path / "factors.csv").front() == "date,id,return");
    CHECK(csv_lines(tmp.path / "ground_truth.csv").size() == 11);

    const auto prof = nlohmann::json::parse(slurp(tmp.path / "profiles.json"));
    CHECK(prof["schema_version"] == 1);
    CHECK(prof["command"] == "score");
    CHECK(prof["config_hash"] == c.hash());
    CHECK(prof["profiles"].size() + prof["unscored"].size() == 10);
    for (const auto& p : prof["profiles"]) {
        CHECK(p.contains("fund_id"));
        CHECK(p["selected"].size() <= 5);
        for (const auto& s : p["selected"]) {
            CHECK(s["p_value"].get<double>() >= 0.0);
            CHECK(s["p_value"].get<double>() <= 1.0);
            CHECK(s["spec"].contains("degree"));
        }
    }

    const auto sv = nlohmann::json::parse(slurp(tmp.path / "svar.json"));
    CHECK(sv["schema_version"] == 1);
    CHECK(sv["results"].size() == 10);
    for (const auto& r : sv["results"]) {
        const double s = r["svar"];
        CHECK(s >= 0.0);
        CHECK(s >= r["specific_risk"].get<double>());
        for (const auto& [id, loss] : r["per_factor_losses"].items()) CHECK(s >= loss.get<double>());
        CHECK(r["gvar"].get<double>() >= 0.0);
    }
    const auto curves = csv_lines(tmp.path / "curves.csv");
    CHECK(curves.front() == "factor_id,probability,value");
    CHECK(curves.size() == 1 + 12 * 99);

    const auto ex = csv_lines(tmp.path / "exceptions.csv");
    CHECK(ex.front() == "measure,rate_1x,rate_2x,rate_3x,mean_excess,median_excess,n_fund_months,n_invalid,ks_distance");
    CHECK(ex.size() == 4);
    const auto norm = csv_lines(tmp.path / "normalized_returns.csv");
    CHECK(norm.front() == "measure,fund_id,date,return,var,normalized");
    for (std::size_t i = 1; i < norm.size(); ++i) CHECK(columns(norm[i]) == 6);

    const auto fof = csv_lines(tmp.path / "fof_returns.csv");
    CHECK(fof.front() == "date,measure,monthly_return,leverage");
    std::set<std::string> seen;
    for (std::size_t i = 1; i < fof.size(); ++i) {
        const auto a = fof[i].find(','), b = fof[i].find(',', a + 1);
        seen.insert(fof[i].substr(a + 1, b - a - 1));
    }
    CHECK(seen == std::set<std::string>{"market", "svar", "gvar", "cfvar", "random"});
    const auto perf = csv_lines(tmp.path / "performance.csv");
    CHECK(perf.front() == "metric,market,svar,gvar,cfvar,random");

    const auto inv = csv_lines(tmp.path / "investor_sims.csv");
    CHECK(inv.front() == "sim_id,measure,excess_return");
    CHECK(inv.size() == 1 + 2 * 20);
}

TEST_CASE("rerun is byte identical and workers do not matter") {
    TempDir tmp("stressvar_cli_rerun");
    auto c = small(tmp.path);
    std::vector<std::string> first;
    const auto files = run_all(c);
    for (const auto& f : files) first.push_back(slurp(f));
    c.set("run.workers", "3");
    const auto again = run_all(c);
    REQUIRE(again == files);
    for (std::size_t i = 0; i < files.size(); ++i) CHECK(slurp(files[i]) == first[i]);
}

TEST_CASE("missing input is an I/O error") {
    TempDir tmp("stressvar_cli_missing");
    const auto c = small(tmp.path);
    try {
        cmd_score(c);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(exit_code(e) == 2);
    }
}
