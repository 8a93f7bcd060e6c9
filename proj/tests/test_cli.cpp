#include <catch2/catch_amalgamated.hpp>

#include <phasediff/cli.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace phasediff;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_comments(const std::string& text) {
    std::istringstream in(text);
    std::string out, line;
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') out += line + "\n";
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PHASEDIFF_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("doubles are printed with 17 significant digits") {
    for (double v : {1.0 / 3.0, 1e-300, 2.5, -0.0, 6.02214076e23, M_PI}) {
        const std::string s = format_double(v);
        const double back = std::strtod(s.c_str(), nullptr);
        CHECK(back == v);
    }
}

TEST_CASE("CSV escaping and parsing round-trip") {
    ResultTable t;
    t.columns = {"a", "b", "c"};
    t.rows.push_back({"1.5", "with,comma", "with \"quote\""});
    t.rows.push_back({"", "line\nbreak", "plain"});
    t.add_provenance("command", "test");
    const std::string csv = to_csv(t);
    auto parsed = parse_csv(csv);
    REQUIRE(parsed.columns == t.columns);
    REQUIRE(parsed.rows.size() == 2);
    CHECK(parsed.rows[0] == t.rows[0]);
    CHECK(parsed.rows[1] == t.rows[1]);
}

TEST_CASE("run_qfi computes the anchor point") {
    JobConfig cfg;
    cfg.command = "qfi";
    cfg.N_grid = {2.0};
    cfg.beta_grid = {1.0};
    cfg.delta_grid = {0.0};
    auto table = run_qfi(cfg);
    REQUIRE(table.rows.size() == 1);
    const int h = table.column_index("H");
    const double H = std::strtod(table.rows[0][h].c_str(), nullptr);
    CHECK(H == Catch::Approx(48.0).epsilon(1e-3));
    CHECK_FALSE(table.has_row_errors());
    // cutoff and tail mass audit columns are populated
    CHECK(std::stoi(table.rows[0][table.column_index("cutoff")]) > 0);
    CHECK(std::strtod(table.rows[0][table.column_index("tail_mass")].c_str(), nullptr) <
          kDefaultTailTol);
}

TEST_CASE("empty grids are usage errors") {
    JobConfig cfg;
    cfg.command = "qfi";
    CHECK_THROWS_AS(run_qfi(cfg), UsageError);
    cfg.N_grid = {2.0};
    cfg.beta_grid = {1.5}; // out of range
    cfg.delta_grid = {0.0};
    CHECK_THROWS_AS(run_qfi(cfg), UsageError);
}

TEST_CASE("table bodies are bytewise reproducible") {
    JobConfig cfg;
    cfg.command = "sweep";
    cfg.N_grid = {2.0, 3.0};
    cfg.delta_grid = {0.1};
    auto a = run_sweep(cfg);
    auto b = run_sweep(cfg);
    CHECK(table_body_csv(a) == table_body_csv(b));
    CHECK(table_body_json(a) == table_body_json(b));

    JobConfig mc;
    mc.command = "crb-mc";
    mc.N_grid = {2.0};
    mc.beta_grid = {0.0};
    mc.delta_grid = {0.1};
    mc.theta_grid = {M_PI / 2.0};
    mc.samples = 500;
    mc.batches = 4;
    mc.seed = 99;
    auto m1 = run_crb_mc(mc);
    auto m2 = run_crb_mc(mc);
    CHECK(table_body_csv(m1) == table_body_csv(m2));
}

TEST_CASE("JSON output mirrors the table") {
    JobConfig cfg;
    cfg.command = "qfi";
    cfg.N_grid = {1.0};
    cfg.beta_grid = {0.0};
    cfg.delta_grid = {0.0};
    auto table = run_qfi(cfg);
    auto doc = nlohmann::json::parse(to_json(table));
    REQUIRE(doc.contains("provenance"));
    REQUIRE(doc.contains("table"));
    CHECK(doc["provenance"]["command"] == "qfi");
    CHECK(doc["table"]["columns"].size() == table.columns.size());
    CHECK(doc["table"]["rows"].size() == 1);
    const double H = doc["table"]["rows"][0][3].get<double>();
    CHECK(H == Catch::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("run_fit consumes sweep output") {
    // synthetic sweep table following the exact fit model
    ResultTable sweep;
    sweep.columns = {"N", "Delta", "beta_opt", "H_opt", "xi", "gamma", "F_homodyne",
                     "cutoff", "tail_mass", "error"};
    for (int i = 0; i < 15; ++i) {
        const double xi = 0.1 * std::pow(1.5, i);
        const double lx = std::log(xi);
        const double gamma = std::exp(-0.05 - 0.6 * lx - 0.25 * lx * lx);
        sweep.rows.push_back({"1", "1", "0.5", "1", format_double(xi), format_double(gamma), "",
                              "32", "0", ""});
    }
    JobConfig cfg;
    cfg.command = "fit";
    auto fit = run_fit(cfg, sweep);
    REQUIRE(fit.rows.size() == 1);
    CHECK(std::strtod(fit.rows[0][0].c_str(), nullptr) == Catch::Approx(0.25).margin(1e-8));
    CHECK(std::strtod(fit.rows[0][1].c_str(), nullptr) == Catch::Approx(0.6).margin(1e-8));
    CHECK(std::strtod(fit.rows[0][2].c_str(), nullptr) == Catch::Approx(-0.05).margin(1e-8));
}

TEST_CASE("worker resolution honors the environment") {
    CHECK(resolve_workers(3) == 3);
    setenv("PHASEDIFF_WORKERS", "2", 1);
    CHECK(resolve_workers(0) == 2);
    setenv("PHASEDIFF_WORKERS", "bogus", 1);
    CHECK(resolve_workers(0) >= 1);
    unsetenv("PHASEDIFF_WORKERS");
    CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("binary: exit codes and reproducible bodies") {
    const std::string out1 = "/tmp/phasediff_cli_test_1.csv";
    const std::string out2 = "/tmp/phasediff_cli_test_2.csv";

    CHECK(run_cli("qfi --N 1 --beta 1 --Delta 0 --output " + out1) == 0);
    CHECK(run_cli("qfi --N 1 --beta 1 --Delta 0 --output " + out2) == 0);
    CHECK(strip_comments(slurp(out1)) == strip_comments(slurp(out2)));

    // usage errors: unknown flag, missing grid, bad value
    CHECK(run_cli("qfi --no-such-flag") == 2);
    CHECK(run_cli("qfi --beta 1 --Delta 0") == 2);
    CHECK(run_cli("qfi --N 1 --beta 7 --Delta 0") == 2);
    CHECK(run_cli("") == 2);
}

TEST_CASE("binary: config file with flag override") {
    const std::string cfg_path = "/tmp/phasediff_cli_test.ini";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[qfi]\n"
               "N = 2\n"
               "beta = 1\n"
               "Delta = 0\n";
    }
    const std::string out = "/tmp/phasediff_cli_test_cfg.csv";
    CHECK(run_cli("--config " + cfg_path + " qfi --output " + out) == 0);
    auto table = parse_csv(slurp(out));
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0][0] == "2");

    // command line overrides the file
    CHECK(run_cli("--config " + cfg_path + " qfi --N 1 --output " + out) == 0);
    auto table2 = parse_csv(slurp(out));
    CHECK(table2.rows[0][0] == "1");

    // effective config dump carries the merged values
    CHECK(run_cli("--config " + cfg_path + " --print-config qfi > /tmp/phasediff_printcfg.txt") ==
          0);
    const std::string dump = slurp("/tmp/phasediff_printcfg.txt");
    CHECK(dump.find("qfi.N=2") != std::string::npos);
    CHECK(dump.find("qfi.beta=1") != std::string::npos);
}

TEST_CASE("binary: json format") {
    const std::string out = "/tmp/phasediff_cli_test.json";
    CHECK(run_cli("qfi --N 1 --beta 0 --Delta 0 --format json --output " + out) == 0);
    auto doc = nlohmann::json::parse(slurp(out));
    CHECK(doc["provenance"]["command"] == "qfi");
    CHECK(doc["table"]["rows"].size() == 1);
}
