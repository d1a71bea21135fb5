#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parafreq/evolution.hpp"
#include "parafreq/frequency.hpp"
#include "parafreq/problem.hpp"
#include "parafreq/spectral.hpp"

namespace parafreq {
namespace experiment {

/// Raised for malformed or contradictory configuration; the CLI maps it (and
/// SolverFailure) to exit code 2, verdict failures to 1, success to 0.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` text, one pair per line, `#` comments, sections spelled
/// as dotted key prefixes. Duplicate keys are rejected.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::istream& in);
KeyValueMap load_key_values(const std::string& path);

enum class CheckKind {
    Identity,
    Monotonicity,
    Convexity,
    LowerBound,
    ExtinctionTime,
    VanishingOrder,
    AlmostMonotonicity,
};

const char* check_name(CheckKind kind);
std::vector<CheckKind> parse_checks(const std::string& comma_list);

enum class InitialKind { Eigenmode, Bump, Random, Barenblatt, Zero, Table };

struct ExperimentConfig {
    ProblemParams<double> params;
    SchemeConfig<double> scheme;

    InitialKind initial = InitialKind::Eigenmode;
    double amplitude = 1.0;
    int mode = 1;                  // eigenmode index
    double center = 0.5, width = 0.25;  // bump
    std::uint64_t seed = 1;        // random data
    int smoothness = 8;            // random data smoothing passes
    double barenblatt_t0 = 1.0, barenblatt_C = 1.0;
    std::string table_path;        // custom table of cell values

    std::optional<double> perturbation_c;
    double perturbation_bound = 0;

    double t_start = 0.0, t_end = 1.0;
    int record_every = 1;

    std::string series_path, report_path;
    std::vector<CheckKind> checks;
    CheckTolerance<double> tol;

    /// The raw user-supplied pairs, echoed into reports.
    KeyValueMap echo;
};

/// Build and fully validate a config from parsed pairs; unknown keys, unknown
/// check names, and out-of-range values raise ConfigError.
ExperimentConfig config_from_map(const KeyValueMap& kv);

std::string format_g17(double x);

/// Series CSV schema (stable): header `t,I,D,N,N_G,extinct_flag`, 17
/// significant digits, `nan` for undefined N/N_G, flag 1 from the extinction
/// record on.
std::string series_csv_text(const FrequencySeries<double>& series);
void write_series_csv(const std::string& path, const FrequencySeries<double>& series);
FrequencySeries<double> read_series_csv(const std::string& path, double p, double q,
                                        int scheme_order);

struct SimulateOutcome {
    FrequencySeries<double> series;
    std::vector<Verdict<double>> verdicts;
    bool trivial = false;
    std::string report_text;
    bool all_passed() const;
};

/// Run one configured simulation, evaluate the requested checks, and write the
/// series CSV / report if paths are configured. Reports contain no clocks or
/// machine identifiers: identical config and seed reproduce them byte for byte.
SimulateOutcome run_simulate(const ExperimentConfig& config);

struct BarenblattTableRow {
    double t, I_closed, I_quadrature, N_closed, residual_norm;
};

std::vector<BarenblattTableRow> barenblatt_table(int n, double p, double q, double C,
                                                 const std::vector<double>& t_list);
std::string barenblatt_table_csv(const std::vector<BarenblattTableRow>& rows);

struct SpectralRunConfig {
    double length = 3.141592653589793;
    std::vector<SpectralMode<double>> modes;
    double t_min = -1.0, t_max = 0.0;
    int samples = 201;
    std::string series_path;
};

struct SpectralOutcome {
    FrequencySeries<double> series;
    GrowthClassification<double> growth;
    std::string report_text;
};

/// Sample the exact spectral series on [t_min, t_max] and classify its growth;
/// the horizon is extended to recommended_horizon() when too short to classify.
SpectralOutcome run_spectral(const SpectralRunConfig& config);

struct VerifyOutcome {
    std::vector<Verdict<double>> verdicts;
    std::size_t records = 0, undefined_records = 0;
    std::string report_text;
    bool all_passed() const;
};

VerifyOutcome run_verify(const std::string& csv_path, double p, double q, int scheme_order,
                         const std::vector<CheckKind>& checks, CheckTolerance<double> tol = {});

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

/// Axis spec `key=v1,v2,...` or `key=a:b` (inclusive integer range) or
/// `key=a:b:step` (numeric ramp, endpoint included within half a step).
SweepAxis parse_axis(const std::string& spec);

struct SweepCellResult {
    KeyValueMap assignments;
    int status = 2;  // 0 pass, 1 verdict failure, 2 error
    std::string message;
};

struct SweepOutcome {
    std::vector<SweepCellResult> cells;
    int exit_code = 2;
    std::string report_text;
};

/// Cartesian sweep of axis overrides on a template config. Cells execute
/// concurrently (capped by PARAFREQ_THREADS); each writes
/// <out_dir>/cell_NNNN.csv and _report.txt, the aggregate lands in
/// <out_dir>/sweep_report.txt.
SweepOutcome run_sweep(const KeyValueMap& template_map, const std::vector<SweepAxis>& axes,
                       const std::string& out_dir);

}  // namespace experiment
}  // namespace parafreq
