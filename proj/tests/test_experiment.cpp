#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parafreq/experiment.hpp"

namespace pfe = parafreq::experiment;
namespace fs = std::filesystem;

namespace {

pfe::KeyValueMap parse(const std::string& text) {
    std::istringstream in(text);
    return pfe::parse_key_values(in);
}

fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "parafreq_test_experiment";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PARAFREQ_CLI_PATH) + " " + args + " > " +
                            (scratch_dir() / "cli_stdout.txt").string() + " 2> " +
                            (scratch_dir() / "cli_stderr.txt").string();
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    return WEXITSTATUS(raw);
}

}  // namespace

TEST_CASE("key=value parser") {
    auto kv = parse("# comment\n a = 1 \n\nsection.key = two words \n");
    CHECK(kv.size() == 2);
    CHECK(kv.at("a") == "1");
    CHECK(kv.at("section.key") == "two words");
    CHECK_THROWS_AS(parse("a = 1\na = 2\n"), pfe::ConfigError);   // duplicate
    CHECK_THROWS_AS(parse("just a line\n"), pfe::ConfigError);    // missing '='
    CHECK_THROWS_AS(parse(" = 1\n"), pfe::ConfigError);           // empty key
}

TEST_CASE("config defaults") {
    auto cfg = pfe::config_from_map({});
    CHECK(cfg.params.p == 2.0);
    CHECK(cfg.params.q == 1.0);
    CHECK(cfg.params.n == 1);
    CHECK(cfg.params.domain.cells == 128);
    CHECK(cfg.params.domain.right == doctest::Approx(EIGEN_PI));
    CHECK(cfg.initial == pfe::InitialKind::Eigenmode);
    CHECK(cfg.scheme.kind == parafreq::SchemeKind::ExplicitRK4);
    CHECK(cfg.scheme.dt == 0.0);
    CHECK(cfg.t_start == 0.0);
    CHECK(cfg.t_end == 1.0);
    CHECK(cfg.tol.atol == 1e-6);
    CHECK(cfg.tol.ctol == 2.0);
    CHECK(cfg.checks.empty());
}

TEST_CASE("config rejection paths") {
    CHECK_THROWS_AS(pfe::config_from_map({{"no.such.key", "1"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"checks", "bogus_check"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"domain.cells", "4"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"domain.kind", "doughnut"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"problem.p", "0.5"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"problem.p", "not_a_number"}}), pfe::ConfigError);
    CHECK_THROWS_AS(
        pfe::config_from_map({{"domain.kind", "ball"}, {"initial.kind", "eigenmode"}}),
        pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"checks", "vanishing_order"}}),
                    pfe::ConfigError);  // delta = 0 at default (p, q)
    CHECK_THROWS_AS(pfe::config_from_map({{"checks", "almost_monotonicity"}}),
                    pfe::ConfigError);  // no perturbation configured
    CHECK_THROWS_AS(pfe::config_from_map({{"seed", "3"}, {"initial.seed", "4"}}),
                    pfe::ConfigError);
    CHECK_THROWS_AS(
        pfe::config_from_map({{"perturbation.c", "0.2"}, {"perturbation.bound", "0.1"}}),
        pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"perturbation.bound", "0.1"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"run.t_end", "-1"}}), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"weight.kind", "zero"}, {"weight.coeff", "1"}}),
                    pfe::ConfigError);
    CHECK_THROWS_AS(pfe::config_from_map({{"initial.kind", "table"}}), pfe::ConfigError);
}

TEST_CASE("seed alias and check parsing") {
    auto cfg = pfe::config_from_map({{"seed", "17"}, {"initial.kind", "random"}});
    CHECK(cfg.seed == 17);
    auto cfg2 = pfe::config_from_map({{"initial.seed", "18"}});
    CHECK(cfg2.seed == 18);
    auto checks = pfe::parse_checks("identity_I_prime, monotonicity ,convexity");
    REQUIRE(checks.size() == 3);
    CHECK(checks[0] == pfe::CheckKind::Identity);
    CHECK(checks[1] == pfe::CheckKind::Monotonicity);
    CHECK(checks[2] == pfe::CheckKind::Convexity);
    CHECK(pfe::parse_checks("").empty());
    CHECK(std::string(pfe::check_name(pfe::CheckKind::LowerBound)) == "lower_bound_I");
}

TEST_CASE("17-digit formatting round-trips doubles") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0}) {
        CHECK(std::strtod(pfe::format_g17(x).c_str(), nullptr) == x);
    }
}

TEST_CASE("series CSV write/read round-trip") {
    parafreq::FrequencySeries<double> s;
    s.params = {2.0, 1.0, 1, parafreq::DomainSpec<double>::interval(0.0, 1.0, 8),
                parafreq::WeightSpec<double>::zero()};
    s.scheme_order = 4;
    for (int k = 0; k < 5; ++k) {
        parafreq::FrequencyRecord<double> rec;
        rec.t = 0.1 * k;
        rec.I = std::exp(-0.2 * k) / 3.0;
        rec.D = -rec.I;
        if (k < 4) {  // leave the last record undefined
            rec.N = -1.0;
            rec.N_G = -1.0;
        }
        s.records.push_back(rec);
    }
    s.extinction_time = 0.4;

    const fs::path path = scratch_dir() / "roundtrip.csv";
    pfe::write_series_csv(path.string(), s);
    const std::string text = read_file(path);
    CHECK(text.rfind("t,I,D,N,N_G,extinct_flag\n", 0) == 0);
    CHECK(text.find("nan,nan,1\n") != std::string::npos);

    auto back = pfe::read_series_csv(path.string(), 2.0, 1.0, 4);
    REQUIRE(back.records.size() == 5);
    for (int k = 0; k < 5; ++k) {
        CHECK(back.records[k].t == s.records[k].t);  // bitwise via %.17g
        CHECK(back.records[k].I == s.records[k].I);
        CHECK(back.records[k].D == s.records[k].D);
        CHECK(back.records[k].N.has_value() == s.records[k].N.has_value());
    }
    REQUIRE(back.extinction_time.has_value());
    CHECK(*back.extinction_time == 0.4);
    CHECK(back.scheme_order == 4);

    write_file(scratch_dir() / "bad_header.csv", "a,b\n");
    CHECK_THROWS_AS(pfe::read_series_csv((scratch_dir() / "bad_header.csv").string(), 2, 1, 4),
                    pfe::ConfigError);
    write_file(scratch_dir() / "bad_row.csv", "t,I,D,N,N_G,extinct_flag\n0,1,0,0\n");
    CHECK_THROWS_AS(pfe::read_series_csv((scratch_dir() / "bad_row.csv").string(), 2, 1, 4),
                    pfe::ConfigError);
}

TEST_CASE("simulate: eigenmode heat run passes its checks") {
    auto cfg = pfe::config_from_map(parse("problem.p = 2\n"
                                          "problem.q = 1\n"
                                          "domain.cells = 64\n"
                                          "scheme.dt = 1e-3\n"
                                          "run.t_end = 0.5\n"
                                          "checks = identity_I_prime, monotonicity, convexity\n"));
    auto out = pfe::run_simulate(cfg);
    CHECK(out.all_passed());
    CHECK_FALSE(out.trivial);
    CHECK(out.series.records.size() == 501);
    CHECK(out.report_text.find("format = parafreq-report-1\n") != std::string::npos);
    CHECK(out.report_text.find("result.pass = 1\n") != std::string::npos);
    CHECK(out.report_text.find("check.identity_I_prime.pass = 1\n") != std::string::npos);
    // Raw config pairs are echoed back.
    CHECK(out.report_text.find("config.problem.p = 2\n") != std::string::npos);
}

TEST_CASE("simulate: zero data is reported trivial and passes vacuously") {
    auto cfg = pfe::config_from_map(
        parse("initial.kind = zero\nscheme.dt = 1e-2\nrun.t_end = 0.1\n"
              "checks = monotonicity, convexity\n"));
    auto out = pfe::run_simulate(cfg);
    CHECK(out.trivial);
    CHECK(out.all_passed());
    CHECK(out.report_text.find("series.trivial = 1\n") != std::string::npos);
}

TEST_CASE("simulate: table initial data") {
    const fs::path table = scratch_dir() / "table.txt";
    std::ostringstream os;
    for (int i = 0; i < 16; ++i) os << 0.5 << "\n";
    write_file(table, os.str());
    auto cfg = pfe::config_from_map({{"domain.cells", "16"},
                                     {"initial.kind", "table"},
                                     {"initial.table", table.string()},
                                     {"scheme.dt", "1e-3"},
                                     {"run.t_end", "0.01"}});
    auto out = pfe::run_simulate(cfg);
    CHECK(out.series.records.front().I > 0.0);

    write_file(scratch_dir() / "short_table.txt", "1\n2\n");
    CHECK_THROWS_AS(
        pfe::run_simulate(pfe::config_from_map(
            {{"domain.cells", "16"},
             {"initial.kind", "table"},
             {"initial.table", (scratch_dir() / "short_table.txt").string()}})),
        pfe::ConfigError);
}

TEST_CASE("barenblatt table matches the closed forms") {
    auto rows = pfe::barenblatt_table(1, 2.0, 1.0, 1.0, {1.0, 2.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].N_closed == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(rows[0].I_closed == doctest::Approx(rows[0].I_quadrature).epsilon(1e-9));
    CHECK(rows[1].I_closed / rows[0].I_closed ==
          doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-12));
    CHECK(rows[0].residual_norm < 1e-3);
    const std::string csv = pfe::barenblatt_table_csv(rows);
    CHECK(csv.rfind("t,I_closed,I_quadrature,N_closed,residual_norm\n", 0) == 0);
}

TEST_CASE("spectral runner classifies and reports") {
    pfe::SpectralRunConfig cfg;
    cfg.modes = {{1, 1.0}, {2, 1.0}};
    cfg.t_min = -2.5;
    auto out = pfe::run_spectral(cfg);
    CHECK(out.growth.kind == parafreq::GrowthKind::Exponential);
    CHECK(out.growth.rate == doctest::Approx(8.0).epsilon(5e-2));
    CHECK(out.report_text.find("growth.kind = exponential\n") != std::string::npos);
}

TEST_CASE("verify re-runs checks on a stored series") {
    auto cfg = pfe::config_from_map(parse("domain.cells = 64\n"
                                          "scheme.dt = 1e-3\n"
                                          "run.t_end = 0.3\n"));
    cfg.series_path = (scratch_dir() / "verify_input.csv").string();
    pfe::run_simulate(cfg);

    auto ok = pfe::run_verify(cfg.series_path, 2.0, 1.0, 4,
                              {pfe::CheckKind::Identity, pfe::CheckKind::Monotonicity}, {});
    CHECK(ok.all_passed());
    CHECK(ok.records == 301);
    CHECK(ok.report_text.find("command = verify\n") != std::string::npos);

    CHECK_THROWS_AS(pfe::run_verify("/no/such/file.csv", 2.0, 1.0, 4,
                                    {pfe::CheckKind::Identity}, {}),
                    pfe::ConfigError);
}

TEST_CASE("axis parsing") {
    auto plain = pfe::parse_axis("problem.q=1,2,0.5");
    CHECK(plain.key == "problem.q");
    CHECK(plain.values == std::vector<std::string>{"1", "2", "0.5"});

    auto range = pfe::parse_axis("initial.seed=3:6");
    CHECK(range.values == std::vector<std::string>{"3", "4", "5", "6"});

    auto ramp = pfe::parse_axis("problem.p=1.5:2.5:0.5");
    REQUIRE(ramp.values.size() == 3);
    CHECK(ramp.values[0] == "1.5");
    CHECK(ramp.values[2] == "2.5");

    CHECK_THROWS_AS(pfe::parse_axis("noequals"), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::parse_axis("k="), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::parse_axis("k=5:2"), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::parse_axis("k=1:2:0"), pfe::ConfigError);
    CHECK_THROWS_AS(pfe::parse_axis("k=1:2:3:4"), pfe::ConfigError);
}

TEST_CASE("sweep runs the cartesian grid and is reproducible") {
    pfe::KeyValueMap tmpl = parse("domain.cells = 32\n"
                                  "initial.kind = random\n"
                                  "initial.smoothness = 40\n"
                                  "scheme.dt = 1e-3\n"
                                  "run.t_end = 0.1\n"
                                  "checks = monotonicity\n");
    std::vector<pfe::SweepAxis> axes = {pfe::parse_axis("problem.q=1,2"),
                                        pfe::parse_axis("initial.seed=1:2")};
    const fs::path dir_a = scratch_dir() / "sweep_a";
    const fs::path dir_b = scratch_dir() / "sweep_b";
    auto a = pfe::run_sweep(tmpl, axes, dir_a.string());
    auto b = pfe::run_sweep(tmpl, axes, dir_b.string());

    CHECK(a.exit_code == 0);
    REQUIRE(a.cells.size() == 4);
    // Last axis fastest: cell 1 keeps q = 1, bumps the seed.
    CHECK(a.cells[1].assignments.at("problem.q") == "1");
    CHECK(a.cells[1].assignments.at("initial.seed") == "2");
    CHECK(a.cells[2].assignments.at("problem.q") == "2");
    CHECK(a.report_text.find("aggregate.pass_count = 4\n") != std::string::npos);

    for (int idx = 0; idx < 4; ++idx) {
        const std::string name = "cell_000" + std::to_string(idx) + ".csv";
        const std::string csv_a = read_file(dir_a / name);
        CHECK(csv_a == read_file(dir_b / name));  // byte-identical reruns
        CHECK(csv_a.rfind("t,I,D,N,N_G,extinct_flag\n", 0) == 0);
    }
    CHECK(fs::exists(dir_a / "sweep_report.txt"));

    CHECK_THROWS_AS(pfe::run_sweep(tmpl, {pfe::parse_axis("bogus.key=1,2")}, dir_a.string()),
                    pfe::ConfigError);
}

TEST_CASE("cli: simulate exits 0 on pass and writes outputs") {
    const fs::path cfg = scratch_dir() / "cli_sim.cfg";
    const fs::path csv = scratch_dir() / "cli_sim.csv";
    const fs::path rpt = scratch_dir() / "cli_sim_report.txt";
    write_file(cfg, "domain.cells = 64\n"
                    "scheme.dt = 1e-3\n"
                    "run.t_end = 0.2\n"
                    "checks = identity_I_prime, monotonicity, convexity\n"
                    "output.series = " + csv.string() + "\n"
                    "output.report = " + rpt.string() + "\n");
    CHECK(run_cli("simulate " + cfg.string()) == 0);
    CHECK(fs::exists(csv));
    const std::string report = read_file(rpt);
    CHECK(report.find("result.pass = 1\n") != std::string::npos);
    // Wall time goes to the console only, never into the report file.
    CHECK(report.find("wall_seconds") == std::string::npos);
    CHECK(read_file(scratch_dir() / "cli_stdout.txt").find("wall_seconds = ") !=
          std::string::npos);
}

TEST_CASE("cli: verify distinguishes pass, verdict failure and config error") {
    const fs::path good = scratch_dir() / "cli_sim.csv";  // produced above
    REQUIRE(fs::exists(good));
    CHECK(run_cli("verify " + good.string() + " --checks monotonicity --order 4") == 0);

    // Fabricated decreasing-I-too-fast series: lower bound must fail -> exit 1.
    const fs::path bad = scratch_dir() / "cli_bad.csv";
    std::ostringstream os;
    os << "t,I,D,N,N_G,extinct_flag\n";
    for (int k = 0; k <= 40; ++k) {
        const double t = 0.05 * k, I = std::exp(-10.0 * t);
        os << pfe::format_g17(t) << ',' << pfe::format_g17(I) << ',' << pfe::format_g17(-I)
           << ",-1,-1,0\n";
    }
    write_file(bad, os.str());
    CHECK(run_cli("verify " + bad.string() + " --checks lower_bound_I") == 1);

    CHECK(run_cli("verify /no/such.csv --checks monotonicity") == 2);
    CHECK(run_cli("verify " + good.string() + " --checks bogus") == 2);
}

TEST_CASE("cli: simulate exits 2 on malformed config") {
    const fs::path cfg = scratch_dir() / "cli_broken.cfg";
    write_file(cfg, "domain.cells = 4\n");
    CHECK(run_cli("simulate " + cfg.string()) == 2);
    CHECK(run_cli("simulate /no/such/config.cfg") == 2);
    const std::string err = read_file(scratch_dir() / "cli_stderr.txt");
    CHECK(err.find("error:") != std::string::npos);
}

TEST_CASE("cli: barenblatt and spectral subcommands") {
    const fs::path out = scratch_dir() / "cli_bb.csv";
    CHECK(run_cli("barenblatt --n 1 --p 2 --q 1 --t 1 --t 2 --out " + out.string()) == 0);
    const std::string table = read_file(out);
    CHECK(table.rfind("t,I_closed,", 0) == 0);

    CHECK(run_cli("spectral --modes 1:1,2:1 --t-range -2.5:0 --samples 251") == 0);
    const std::string echoed = read_file(scratch_dir() / "cli_stdout.txt");
    CHECK(echoed.find("growth.kind = exponential") != std::string::npos);

    CHECK(run_cli("barenblatt --n 3 --p 2 --q 0.2 --t 1") == 2);  // invalid regime
    CHECK(run_cli("spectral --modes 1:1 --t-range 0:1") == 2);    // not ancient
}

TEST_CASE("cli: sweep end to end with PARAFREQ_THREADS cap") {
    const fs::path tmpl = scratch_dir() / "cli_sweep.cfg";
    write_file(tmpl, "domain.cells = 32\n"
                     "scheme.dt = 1e-3\n"
                     "run.t_end = 0.1\n"
                     "checks = monotonicity\n");
    const fs::path dir = scratch_dir() / "cli_sweep_out";
    const std::string env = "PARAFREQ_THREADS=2 ";
    const std::string cmd =
        env + std::string(PARAFREQ_CLI_PATH) + " sweep " + tmpl.string() +
        " --axis problem.q=1,2 --axis initial.mode=1:2 --out-dir " + dir.string() + " > " +
        (scratch_dir() / "cli_stdout.txt").string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    CHECK(WEXITSTATUS(raw) == 0);
    CHECK(fs::exists(dir / "sweep_report.txt"));
    CHECK(fs::exists(dir / "cell_0003.csv"));
    const std::string report = read_file(dir / "sweep_report.txt");
    CHECK(report.find("aggregate.error_count = 0\n") != std::string::npos);
    CHECK(report.find("result.pass = 1\n") != std::string::npos);
}

TEST_CASE("cli: no subcommand is an error") {
    CHECK(run_cli("") == 2);
}
