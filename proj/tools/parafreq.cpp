// Command-line front door: simulate | barenblatt | spectral | verify | sweep.
// Exit codes: 0 all verdicts pass, 1 verdict failure, 2 config/solver error.
// Reports go to stdout and optional files; wall time is printed to the console
// only, keeping the files byte-reproducible.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parafreq/experiment.hpp"

namespace pfe = parafreq::experiment;

namespace {

std::vector<parafreq::SpectralMode<double>> parse_modes(const std::string& spec) {
    std::vector<parafreq::SpectralMode<double>> modes;
    if (spec.empty()) return modes;
    std::string cur;
    auto flush = [&] {
        const auto colon = cur.find(':');
        if (colon == std::string::npos)
            throw pfe::ConfigError("--modes: entries are k:amplitude, got '" + cur + "'");
        try {
            modes.push_back({std::stoi(cur.substr(0, colon)), std::stod(cur.substr(colon + 1))});
        } catch (const std::exception&) {
            throw pfe::ConfigError("--modes: bad entry '" + cur + "'");
        }
        cur.clear();
    };
    for (char ch : spec) {
        if (ch == ',') flush();
        else cur += ch;
    }
    flush();
    return modes;
}

void parse_t_range(const std::string& spec, double& t_min, double& t_max) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw pfe::ConfigError("--t-range: expected t_min:t_max, got '" + spec + "'");
    try {
        t_min = std::stod(spec.substr(0, colon));
        t_max = std::stod(spec.substr(colon + 1));
    } catch (const std::exception&) {
        throw pfe::ConfigError("--t-range: bad bounds '" + spec + "'");
    }
}

void emit(const std::string& report, const std::string& out_path) {
    std::cout << report;
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw pfe::ConfigError("cannot open output file '" + out_path + "'");
        f << report;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parabolic frequency laboratory for du/dt = L_{p,phi} u^q"};
    app.require_subcommand(1);

    std::string config_path;
    auto* simulate = app.add_subcommand("simulate", "run one configured evolution with checks");
    simulate->add_option("config", config_path, "flat key=value config file")->required();

    int bb_n = 1;
    double bb_p = 2, bb_q = 1, bb_C = 1;
    std::vector<double> bb_t;
    std::string bb_out;
    auto* barenblatt = app.add_subcommand("barenblatt", "closed-form self-similar table");
    barenblatt->add_option("--n", bb_n, "spatial dimension")->capture_default_str();
    barenblatt->add_option("--p", bb_p, "gradient exponent p > 1")->capture_default_str();
    barenblatt->add_option("--q", bb_q, "porous-medium exponent q > 0")->capture_default_str();
    barenblatt->add_option("--C", bb_C, "profile constant C > 0")->capture_default_str();
    barenblatt->add_option("--t", bb_t, "sample times (repeatable)")->required();
    barenblatt->add_option("--out", bb_out, "write table CSV here (default stdout only)");

    double sp_L = 3.141592653589793;
    std::string sp_modes, sp_range = "-1:0", sp_out;
    int sp_samples = 201;
    auto* spectral = app.add_subcommand("spectral", "ancient heat-flow series and growth class");
    spectral->add_option("--L", sp_L, "interval length")->capture_default_str();
    spectral->add_option("--modes", sp_modes, "k:amplitude pairs, e.g. 1:1,2:0.5")->required();
    spectral->add_option("--t-range", sp_range, "t_min:t_max with t_max <= 0")
        ->capture_default_str();
    spectral->add_option("--samples", sp_samples, "sample count")->capture_default_str();
    spectral->add_option("--out", sp_out, "write series CSV here");

    std::string vf_path, vf_checks;
    double vf_p = 2, vf_q = 1, vf_atol = 1e-6, vf_ctol = 2.0;
    int vf_order = 2;
    auto* verify = app.add_subcommand("verify", "re-run checks on a stored series CSV");
    verify->add_option("series", vf_path, "series CSV file")->required();
    verify->add_option("--checks", vf_checks, "comma list of check names")->required();
    verify->add_option("--p", vf_p, "exponent p of the generating run")->capture_default_str();
    verify->add_option("--q", vf_q, "exponent q of the generating run")->capture_default_str();
    verify->add_option("--order", vf_order, "time scheme order for tolerances")
        ->capture_default_str();
    verify->add_option("--atol", vf_atol, "absolute tolerance")->capture_default_str();
    verify->add_option("--ctol", vf_ctol, "dt-term tolerance coefficient")->capture_default_str();

    std::string sw_template, sw_dir = "sweep_out";
    std::vector<std::string> sw_axes;
    auto* sweep = app.add_subcommand("sweep", "cartesian sweep of a template config");
    sweep->add_option("template", sw_template, "template config file")->required();
    sweep->add_option("--axis", sw_axes, "axis spec key=v1,v2 or key=a:b[:step] (repeatable)")
        ->required();
    sweep->add_option("--out-dir", sw_dir, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    int exit_code = 0;
    try {
        if (app.got_subcommand(simulate)) {
            const auto cfg = pfe::config_from_map(pfe::load_key_values(config_path));
            const auto outcome = pfe::run_simulate(cfg);
            std::cout << outcome.report_text;
            exit_code = outcome.all_passed() ? 0 : 1;
        } else if (app.got_subcommand(barenblatt)) {
            const auto rows = pfe::barenblatt_table(bb_n, bb_p, bb_q, bb_C, bb_t);
            emit(pfe::barenblatt_table_csv(rows), bb_out);
        } else if (app.got_subcommand(spectral)) {
            pfe::SpectralRunConfig cfg;
            cfg.length = sp_L;
            cfg.modes = parse_modes(sp_modes);
            parse_t_range(sp_range, cfg.t_min, cfg.t_max);
            cfg.samples = sp_samples;
            cfg.series_path = sp_out;
            const auto outcome = pfe::run_spectral(cfg);
            std::cout << outcome.report_text;
        } else if (app.got_subcommand(verify)) {
            const auto outcome =
                pfe::run_verify(vf_path, vf_p, vf_q, vf_order, pfe::parse_checks(vf_checks),
                                parafreq::CheckTolerance<double>{vf_atol, vf_ctol});
            std::cout << outcome.report_text;
            exit_code = outcome.all_passed() ? 0 : 1;
        } else if (app.got_subcommand(sweep)) {
            std::vector<pfe::SweepAxis> axes;
            for (const auto& spec : sw_axes) axes.push_back(pfe::parse_axis(spec));
            const auto outcome =
                pfe::run_sweep(pfe::load_key_values(sw_template), axes, sw_dir);
            std::cout << outcome.report_text;
            exit_code = outcome.exit_code;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - t0;
    std::fprintf(stdout, "wall_seconds = %.3f\n", wall.count());
    return exit_code;
}
