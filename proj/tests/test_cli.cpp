#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pbill/commands.hpp"
#include "pbill/error.hpp"
#include "pbill/stats.hpp"

using namespace pbill;
namespace fs = std::filesystem;

namespace {

const fs::path work_dir = fs::path(PBILL_TEST_TMP) / "cli";

ordered_json base_config() {
    return ordered_json::parse(R"({
      "schema_version": 1,
      "billiard": {"lx": 1.0, "ly": 1.618033988749895, "mass": 1.0},
      "scatterers": {"lambda": 1.0, "points": [{"x": 0.3137, "y": 0.7211, "vbar_inv": 2.0}]},
      "window": {"lo": 600.0, "hi": 1500.0},
      "accuracy": {"n_max": 20000},
      "solver": {"tol": 1e-9},
      "seed": 7,
      "output": {"format": "csv"}
    })");
}

fs::path write_config(const std::string& name, const ordered_json& j) {
    fs::create_directories(work_dir);
    const fs::path p = work_dir / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
};

// Runs the CLI with stdout captured to a file; stderr is discarded.
Run run_cli(const std::string& args) {
    fs::create_directories(work_dir);
    const fs::path out = work_dir / "stdout.txt";
    const std::string cmd = std::string("\"") + PBILL_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

}  // namespace

TEST_CASE("config validation lists every violation at once") {
    ordered_json j = base_config();
    j["billiard"]["lx"] = -1.0;
    j["scatterers"]["lambda"] = 0.0;
    j["stats"] = {{"bins", 0}};
    j["bogus"] = 1;
    try {
        const RunConfig c = config_from_json(j);
        validate(c);
        FAIL("expected a ContractError");
    } catch (const ContractError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bogus") != std::string::npos);
    }
    j.erase("bogus");
    const RunConfig c = config_from_json(j);
    const auto errs = validation_errors(c);
    CHECK(errs.size() >= 3);
    std::string all;
    for (const auto& e : errs) all += e + "\n";
    CHECK(all.find("lambda") != std::string::npos);
    CHECK(all.find("bins") != std::string::npos);
    CHECK(all.find("lx") != std::string::npos);
}

TEST_CASE("config round-trips through its JSON form") {
    ordered_json j = base_config();
    j["scatterers"]["points"].push_back({{"x", 0.6}, {"y", 1.1}, {"vbar_inv", "band_center-0.5"}});
    j["scatterers"]["random"] = {{"count", 2}, {"margin", 0.1}, {"vbar_inv", 0.25}};
    j["sweep"] = {{"vbar_inv", ordered_json::array({0.5, "band_center", "band_center+4.712"})}};
    const RunConfig a = config_from_json(j);
    const RunConfig b = config_from_json(config_to_json(a));
    CHECK(config_to_json(a) == config_to_json(b));
    const ScattererSet s = resolve_scatterers(a);
    REQUIRE(s.size() == 4);
    const double center = 0.5 * (600.0 + 1500.0);
    CHECK(s.vbar_inv[1] == doctest::Approx(std::log(center) / (2.0 * std::numbers::pi) - 0.5).epsilon(1e-14));
    // Random draws are a pure function of the seed.
    const ScattererSet again = resolve_scatterers(b);
    CHECK(again.positions[2].x == s.positions[2].x);
    CHECK(again.positions[3].y == s.positions[3].y);
}

TEST_CASE("window parsing") {
    const EnergyWindow w = parse_window("-inf:250.5");
    CHECK(std::isinf(w.lo));
    CHECK(w.lo < 0.0);
    CHECK(w.hi == 250.5);
    CHECK(parse_window("10:20").lo == 10.0);
    CHECK_THROWS_AS(parse_window("10-20"), ContractError);
    CHECK_THROWS_AS(parse_window("a:20"), ContractError);
}

TEST_CASE("CSV and JSON renderings carry identical numbers") {
    const RunConfig c = config_from_json(base_config());
    const ResultEnvelope env = cmd_spectrum(c);
    const auto a = read_table(render(env, OutputFormat::csv), "levels");
    const auto b = read_table(render(env, OutputFormat::json), "levels");
    REQUIRE(a.size() == b.size());
    REQUIRE(!a.empty());
    for (std::size_t r = 0; r < a.size(); ++r) {
        REQUIRE(a[r].size() == b[r].size());
        for (std::size_t k = 0; k < a[r].size(); ++k) {
            if (std::isnan(a[r][k])) {
                CHECK(std::isnan(b[r][k]));
            } else {
                CHECK(a[r][k] == b[r][k]);
            }
        }
    }
    CHECK(read_levels(render(env, OutputFormat::csv)) == read_levels(render(env, OutputFormat::json)));
}

TEST_CASE("spectrum output interlaces and records brackets and residuals") {
    const RunConfig c = config_from_json(base_config());
    const ResultEnvelope env = cmd_spectrum(c);
    REQUIRE(env.tables.size() >= 1);
    const Table& t = env.tables.front();
    CHECK(t.columns == std::vector<std::string>{"index", "omega", "bracket_lo", "bracket_hi", "kind", "residual",
                                                "multiplicity"});
    for (const auto& row : t.rows) {
        const double w = std::get<double>(row[1]);
        CHECK(std::get<double>(row[2]) < w);
        CHECK(w < std::get<double>(row[3]));
        CHECK(std::get<double>(row[5]) <= 1e-9);
    }
}

TEST_CASE("no scatterers echoes the unperturbed spectrum") {
    ordered_json j = base_config();
    j["scatterers"]["points"] = ordered_json::array();
    const RunConfig c = config_from_json(j);
    const ResultEnvelope env = cmd_spectrum(c);
    const auto levels = read_levels(render(env, OutputFormat::csv));
    const ModeTable t = ModeTable::up_to_energy(c.billiard, 1500.0);
    std::vector<double> expected;
    for (double e : t.energies())
        if (e >= 600.0 && e <= 1500.0) expected.push_back(e);
    CHECK(levels == expected);
}

TEST_CASE("the CLI is deterministic and round-trips spectrum output into stats") {
    ordered_json j = base_config();
    j["window"] = {{"lo", 3000.0}, {"hi", 3600.0}};
    j["stats"] = {{"exclude_lowest", 200}, {"bins", 20}};
    const fs::path cfg = write_config("det.json", j);
    const fs::path spec_out = work_dir / "levels.csv";

    const Run a = run_cli("--config \"" + cfg.string() + "\" spectrum");
    const Run b = run_cli("--config \"" + cfg.string() + "\" spectrum");
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("schema_version") != std::string::npos);
    CHECK(a.out.find("\"lx\"") != std::string::npos);  // config echo

    REQUIRE(run_cli("--config \"" + cfg.string() + "\" --out \"" + spec_out.string() + "\" spectrum").code == 0);
    const Run piped = run_cli("--config \"" + cfg.string() + "\" stats --input \"" + spec_out.string() + "\"");
    const Run inline_run = run_cli("--config \"" + cfg.string() + "\" stats");
    REQUIRE(piped.code == 0);
    REQUIRE(inline_run.code == 0);
    CHECK(read_table(piped.out, "histogram") == read_table(inline_run.out, "histogram"));
    CHECK(read_table(piped.out, "spacings") == read_table(inline_run.out, "spacings"));

    const Run js = run_cli("--config \"" + cfg.string() + "\" --format json stats");
    REQUIRE(js.code == 0);
    const auto env = ordered_json::parse(js.out);
    CHECK(env.at("summary").contains("ks_poisson"));
    const std::string key = "# summary.ks_poisson=";
    const auto pos = inline_run.out.find(key);
    REQUIRE(pos != std::string::npos);
    const double from_csv = std::stod(inline_run.out.substr(pos + key.size()));
    CHECK(env.at("summary").at("ks_poisson").get<double>() == from_csv);
}

TEST_CASE("a singleton sweep equals the stats command") {
    ordered_json j = base_config();
    j["window"] = {{"lo", 3000.0}, {"hi", 3600.0}};
    j["sweep"] = {{"vbar_inv", ordered_json::array({2.0})}};
    const RunConfig c = config_from_json(j);
    const ResultEnvelope sweep = cmd_sweep(c);
    const ResultEnvelope stats = cmd_stats(c, std::nullopt);
    REQUIRE(sweep.tables.front().rows.size() == 1);
    const auto& row = sweep.tables.front().rows.front();
    CHECK(std::get<double>(row[2]) == stats.summary.at("ks_poisson").get<double>());
    CHECK(std::get<double>(row[3]) == stats.summary.at("ks_goe").get<double>());
}

TEST_CASE("survey over a window without gaps succeeds with a note") {
    ordered_json j = base_config();
    const ModeTable t = ModeTable::lowest(BilliardSpec{}, 2000);
    const double lo = t.energy(1500) + 1e-6, hi = lo + 1e-6;
    j["window"] = {{"lo", lo}, {"hi", hi}};
    const fs::path cfg = write_config("survey.json", j);
    const Run r = run_cli("--config \"" + cfg.string() + "\" survey");
    CHECK(r.code == 0);
    CHECK(read_table(r.out, "survey").empty());
    CHECK(r.out.find("# diagnostic=") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage, validation and I/O failures") {
    const fs::path good = write_config("good.json", base_config());
    CHECK(run_cli("--config \"" + good.string() + "\" predict").code == 0);
    CHECK(run_cli("--config \"" + good.string() + "\" frobnicate").code == 1);
    CHECK(run_cli("spectrum").code == 1);

    ordered_json bad = base_config();
    bad["billiard"]["mass"] = -2.0;
    const fs::path bad_cfg = write_config("bad.json", bad);
    CHECK(run_cli("--config \"" + bad_cfg.string() + "\" spectrum").code == 2);

    CHECK(run_cli("--config \"" + good.string() + "\" stats --input \"" + (work_dir / "missing.csv").string() + "\"")
              .code == 4);
    CHECK(run_cli("--config \"" + good.string() + "\" --out /nonexistent-dir/x.csv spectrum").code == 4);

    ordered_json tiny = base_config();
    tiny["window"] = {{"lo", 600.0}, {"hi", 700.0}};
    const fs::path tiny_cfg = write_config("tiny.json", tiny);
    CHECK(run_cli("--config \"" + tiny_cfg.string() + "\" stats").code == 2);
}
