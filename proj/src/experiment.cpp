#include "parafreq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "parafreq/barenblatt.hpp"
#include "parafreq/initial_data.hpp"

namespace parafreq {
namespace experiment {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || std::isnan(x))
        throw ConfigError("key '" + key + "': bad numeric value '" + value + "'");
    return x;
}

long to_long(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError("key '" + key + "': bad integer value '" + value + "'");
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size())
        throw ConfigError("key '" + key + "': bad seed value '" + value + "'");
    return x;
}

/// Typed access over a raw map with a membership registry.
struct KeyReader {
    const KeyValueMap& kv;

    bool has(const std::string& k) const { return kv.count(k) != 0; }
    std::string str(const std::string& k, const std::string& dflt) const {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : trim(it->second);
    }
    double num(const std::string& k, double dflt) const {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : to_double(k, it->second);
    }
    long integer(const std::string& k, long dflt) const {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : to_long(k, it->second);
    }
};

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "problem.p", "problem.q", "problem.n",
        "domain.kind", "domain.left", "domain.right", "domain.cells",
        "weight.kind", "weight.coeff",
        "scheme.kind", "scheme.dt", "scheme.cfl_safety", "scheme.dt_max",
        "scheme.newton.max_iter", "scheme.newton.abs_tol", "scheme.newton.rel_tol",
        "scheme.newton.damping_min",
        "initial.kind", "initial.amplitude", "initial.mode", "initial.center", "initial.width",
        "initial.seed", "initial.smoothness", "initial.t0", "initial.C", "initial.table",
        "seed",
        "perturbation.c", "perturbation.bound",
        "run.t_start", "run.t_end", "run.record_every",
        "output.series", "output.report",
        "checks",
        "tolerance.atol", "tolerance.ctol",
    };
    return keys;
}

ArrayX<double> load_table(const std::string& path, Eigen::Index cells) {
    std::ifstream in(path);
    if (!in) throw ConfigError("initial.table: cannot open '" + path + "'");
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        vals.push_back(to_double("initial.table entry", line));
    }
    if (Eigen::Index(vals.size()) != cells)
        throw ConfigError("initial.table: " + std::to_string(vals.size()) + " values for " +
                          std::to_string(cells) + " cells");
    ArrayX<double> u(cells);
    for (Eigen::Index i = 0; i < cells; ++i) u[i] = vals[std::size_t(i)];
    return u;
}

struct CheckRun {
    std::vector<Verdict<double>> verdicts;
    std::vector<std::pair<std::string, std::string>> extras;
};

/// Shared dispatcher for simulate and verify. `c_envelope` feeds the
/// almost-monotonicity inequalities; precondition errors from individual
/// checks surface as ConfigError.
CheckRun evaluate_checks(const FrequencySeries<double>& series,
                         const std::vector<CheckKind>& checks, CheckTolerance<double> tol,
                         std::optional<double> c_envelope) {
    CheckRun out;
    try {
        for (CheckKind kind : checks) {
            switch (kind) {
                case CheckKind::Identity:
                    out.verdicts.push_back(check_identity_I_prime(series, tol));
                    break;
                case CheckKind::Monotonicity: {
                    auto vs = check_monotonicity(series, tol);
                    out.verdicts.insert(out.verdicts.end(), vs.begin(), vs.end());
                    break;
                }
                case CheckKind::Convexity:
                    out.verdicts.push_back(check_convexity(series, tol));
                    break;
                case CheckKind::LowerBound:
                    out.verdicts.push_back(lower_bound_I(series, 0, tol));
                    break;
                case CheckKind::ExtinctionTime:
                    out.verdicts.push_back(check_extinction_time(series, 0, tol));
                    break;
                case CheckKind::VanishingOrder: {
                    auto vo = vanishing_order(series, 0);
                    out.extras.emplace_back("check.vanishing_order.k_hat", format_g17(vo.k_hat));
                    out.verdicts.push_back(vo.bound);
                    break;
                }
                case CheckKind::AlmostMonotonicity: {
                    if (!c_envelope)
                        throw ConfigError(
                            "almost_monotonicity requires a configured perturbation envelope");
                    const double C = *c_envelope;
                    auto vs = almost_monotonicity_check(series, [C](double) { return C; }, tol);
                    out.verdicts.insert(out.verdicts.end(), vs.begin(), vs.end());
                    break;
                }
            }
        }
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("check preconditions: ") + ex.what());
    }
    return out;
}

void append_check_lines(std::ostringstream& os, const CheckRun& run) {
    for (const auto& v : run.verdicts) {
        os << "check." << v.name << ".pass = " << (v.passed ? 1 : 0) << "\n";
        os << "check." << v.name << ".worst = " << format_g17(v.worst_violation) << "\n";
        os << "check." << v.name << ".tolerance = " << format_g17(v.tolerance) << "\n";
        os << "check." << v.name << ".location = " << format_g17(v.location_t) << "\n";
    }
    for (const auto& kvp : run.extras) os << kvp.first << " = " << kvp.second << "\n";
}

bool all_pass(const std::vector<Verdict<double>>& vs) {
    for (const auto& v : vs)
        if (!v.passed) return false;
    return true;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    out << text;
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

std::size_t count_undefined(const FrequencySeries<double>& s) {
    std::size_t k = 0;
    for (const auto& r : s.records)
        if (!r.N) ++k;
    return k;
}

unsigned sweep_thread_cap() {
    if (const char* env = std::getenv("PARAFREQ_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1) return unsigned(n);
        throw ConfigError(std::string("PARAFREQ_THREADS: bad value '") + env + "'");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1u;
}

}  // namespace

KeyValueMap parse_key_values(std::istream& in) {
    KeyValueMap kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return kv;
}

KeyValueMap load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_key_values(in);
}

const char* check_name(CheckKind kind) {
    switch (kind) {
        case CheckKind::Identity: return "identity_I_prime";
        case CheckKind::Monotonicity: return "monotonicity";
        case CheckKind::Convexity: return "convexity";
        case CheckKind::LowerBound: return "lower_bound_I";
        case CheckKind::ExtinctionTime: return "extinction_time";
        case CheckKind::VanishingOrder: return "vanishing_order";
        case CheckKind::AlmostMonotonicity: return "almost_monotonicity";
    }
    return "?";
}

std::vector<CheckKind> parse_checks(const std::string& comma_list) {
    std::vector<CheckKind> out;
    const std::string body = trim(comma_list);
    if (body.empty() || body == "none") return out;
    for (const std::string& raw : split(body, ',')) {
        const std::string name = trim(raw);
        if (name.empty()) throw ConfigError("checks: empty entry in list");
        bool found = false;
        for (CheckKind kind :
             {CheckKind::Identity, CheckKind::Monotonicity, CheckKind::Convexity,
              CheckKind::LowerBound, CheckKind::ExtinctionTime, CheckKind::VanishingOrder,
              CheckKind::AlmostMonotonicity}) {
            if (name == check_name(kind)) {
                if (std::find(out.begin(), out.end(), kind) != out.end())
                    throw ConfigError("checks: duplicate '" + name + "'");
                out.push_back(kind);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("checks: unknown check name '" + name + "'");
    }
    return out;
}

ExperimentConfig config_from_map(const KeyValueMap& kv) {
    for (const auto& kvp : kv)
        if (!known_keys().count(kvp.first))
            throw ConfigError("unknown config key '" + kvp.first + "'");
    const KeyReader r{kv};
    ExperimentConfig cfg;
    cfg.echo = kv;

    cfg.params.p = r.num("problem.p", 2.0);
    cfg.params.q = r.num("problem.q", 1.0);
    cfg.params.n = int(r.integer("problem.n", 1));

    const std::string dk = r.str("domain.kind", "interval");
    const double left = r.num("domain.left", 0.0);
    const double right = r.num("domain.right", dk == "interval" ? 3.141592653589793 : 1.0);
    const Eigen::Index cells = r.integer("domain.cells", 128);
    if (cells < 8) throw ConfigError("domain.cells: at least 8 cells required");
    if (dk == "interval") {
        cfg.params.domain = DomainSpec<double>::interval(left, right, cells);
    } else if (dk == "ball" || dk == "truncated") {
        if (r.has("domain.left") && left != 0.0)
            throw ConfigError("domain.left: radial domains start at the origin");
        cfg.params.domain = dk == "ball" ? DomainSpec<double>::ball(right, cells)
                                         : DomainSpec<double>::truncated(right, cells);
    } else {
        throw ConfigError("domain.kind: expected interval|ball|truncated, got '" + dk + "'");
    }

    const std::string wk = r.str("weight.kind", "zero");
    if (wk == "zero") {
        if (r.has("weight.coeff")) throw ConfigError("weight.coeff: only valid for quadratic");
        cfg.params.weight = WeightSpec<double>::zero();
    } else if (wk == "quadratic") {
        cfg.params.weight = WeightSpec<double>::quadratic(r.num("weight.coeff", 0.25));
    } else {
        throw ConfigError("weight.kind: expected zero|quadratic, got '" + wk + "'");
    }

    const std::string sk = r.str("scheme.kind", "rk4");
    if (sk == "rk4")
        cfg.scheme.kind = SchemeKind::ExplicitRK4;
    else if (sk == "euler")
        cfg.scheme.kind = SchemeKind::ExplicitEuler;
    else if (sk == "implicit")
        cfg.scheme.kind = SchemeKind::ImplicitEuler;
    else
        throw ConfigError("scheme.kind: expected rk4|euler|implicit, got '" + sk + "'");
    cfg.scheme.dt = r.num("scheme.dt", 0.0);
    cfg.scheme.cfl_safety = r.num("scheme.cfl_safety", 0.5);
    cfg.scheme.dt_max = r.num("scheme.dt_max", std::numeric_limits<double>::infinity());
    cfg.scheme.newton.max_iter = int(r.integer("scheme.newton.max_iter", 40));
    cfg.scheme.newton.abs_tol = r.num("scheme.newton.abs_tol", 1e-12);
    cfg.scheme.newton.rel_tol = r.num("scheme.newton.rel_tol", 1e-10);
    cfg.scheme.newton.damping_min = r.num("scheme.newton.damping_min", 1.0 / 64.0);

    const std::string ik = r.str("initial.kind", "eigenmode");
    if (ik == "eigenmode")
        cfg.initial = InitialKind::Eigenmode;
    else if (ik == "bump")
        cfg.initial = InitialKind::Bump;
    else if (ik == "random")
        cfg.initial = InitialKind::Random;
    else if (ik == "barenblatt")
        cfg.initial = InitialKind::Barenblatt;
    else if (ik == "zero")
        cfg.initial = InitialKind::Zero;
    else if (ik == "table")
        cfg.initial = InitialKind::Table;
    else
        throw ConfigError("initial.kind: expected eigenmode|bump|random|barenblatt|zero|table");
    cfg.amplitude = r.num("initial.amplitude", 1.0);
    cfg.mode = int(r.integer("initial.mode", 1));
    cfg.center = r.num("initial.center", 0.5 * (left + right));
    cfg.width = r.num("initial.width", 0.25 * (right - left));
    if (r.has("seed") && r.has("initial.seed"))
        throw ConfigError("give either 'seed' or 'initial.seed', not both");
    cfg.seed = to_u64("seed", r.str("initial.seed", r.str("seed", "1")));
    cfg.smoothness = int(r.integer("initial.smoothness", 8));
    cfg.barenblatt_t0 = r.num("initial.t0", 1.0);
    cfg.barenblatt_C = r.num("initial.C", 1.0);
    cfg.table_path = r.str("initial.table", "");
    if (cfg.initial == InitialKind::Table && cfg.table_path.empty())
        throw ConfigError("initial.table: path required for table initial data");
    if (cfg.initial == InitialKind::Eigenmode && cfg.params.domain.radial())
        throw ConfigError("initial.kind=eigenmode requires an interval domain");
    if (cfg.initial == InitialKind::Barenblatt) {
        if (cfg.params.weight.kind != WeightSpec<double>::Kind::Zero)
            throw ConfigError("initial.kind=barenblatt requires weight.kind=zero");
        if (!(cfg.barenblatt_t0 > 0)) throw ConfigError("initial.t0: must be positive");
    }
    if (cfg.smoothness < 0) throw ConfigError("initial.smoothness: must be >= 0");
    if (cfg.mode < 1) throw ConfigError("initial.mode: must be >= 1");

    if (r.has("perturbation.c")) {
        cfg.perturbation_c = r.num("perturbation.c", 0.0);
        cfg.perturbation_bound = r.num("perturbation.bound", std::abs(*cfg.perturbation_c));
        if (cfg.perturbation_bound < std::abs(*cfg.perturbation_c))
            throw ConfigError("perturbation.bound: must dominate |perturbation.c|");
    } else if (r.has("perturbation.bound")) {
        throw ConfigError("perturbation.bound: requires perturbation.c");
    }

    cfg.t_start = r.num("run.t_start", 0.0);
    cfg.t_end = r.num("run.t_end", 1.0);
    if (!(cfg.t_end >= cfg.t_start)) throw ConfigError("run.t_end: must be >= run.t_start");
    cfg.record_every = int(r.integer("run.record_every", 1));
    if (cfg.record_every < 1) throw ConfigError("run.record_every: must be >= 1");

    cfg.series_path = r.str("output.series", "");
    cfg.report_path = r.str("output.report", "");
    cfg.checks = parse_checks(r.str("checks", ""));
    cfg.tol.atol = r.num("tolerance.atol", 1e-6);
    cfg.tol.ctol = r.num("tolerance.ctol", 2.0);
    if (!(cfg.tol.atol >= 0) || !(cfg.tol.ctol >= 0))
        throw ConfigError("tolerance values must be nonnegative");

    for (CheckKind kind : cfg.checks) {
        if (kind == CheckKind::AlmostMonotonicity && !cfg.perturbation_c)
            throw ConfigError("checks: almost_monotonicity needs perturbation.c");
        if (kind == CheckKind::VanishingOrder && !(cfg.params.delta() > 0))
            throw ConfigError("checks: vanishing_order needs delta = q(p-1)-1 > 0");
    }

    try {
        cfg.params.validate();
        cfg.scheme.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
    return cfg;
}

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string series_csv_text(const FrequencySeries<double>& series) {
    std::ostringstream os;
    os << "t,I,D,N,N_G,extinct_flag\n";
    for (const auto& rec : series.records) {
        const bool flag = series.extinction_time && rec.t >= *series.extinction_time;
        os << format_g17(rec.t) << ',' << format_g17(rec.I) << ',' << format_g17(rec.D) << ',';
        os << (rec.N ? format_g17(*rec.N) : "nan") << ',';
        os << (rec.N_G ? format_g17(*rec.N_G) : "nan") << ',';
        os << (flag ? 1 : 0) << "\n";
    }
    return os.str();
}

void write_series_csv(const std::string& path, const FrequencySeries<double>& series) {
    write_text(path, series_csv_text(series));
}

FrequencySeries<double> read_series_csv(const std::string& path, double p, double q,
                                        int scheme_order) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open series file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line) != "t,I,D,N,N_G,extinct_flag")
        throw ConfigError("series file '" + path + "': bad or missing header");
    FrequencySeries<double> series;
    series.params.p = p;
    series.params.q = q;
    series.params.n = 1;
    series.params.domain = DomainSpec<double>::interval(0.0, 1.0, 2);
    series.params.weight = WeightSpec<double>::zero();
    series.scheme_order = scheme_order;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(trim(line), ',');
        if (fields.size() != 6)
            throw ConfigError("series file line " + std::to_string(lineno) + ": want 6 fields");
        auto field_num = [&](int i, bool nan_ok) {
            const std::string v = trim(fields[std::size_t(i)]);
            char* end = nullptr;
            const double x = std::strtod(v.c_str(), &end);
            if (v.empty() || end != v.c_str() + v.size() || (!nan_ok && std::isnan(x)))
                throw ConfigError("series file line " + std::to_string(lineno) +
                                  ": bad value '" + v + "'");
            return x;
        };
        FrequencyRecord<double> rec;
        rec.t = field_num(0, false);
        rec.I = field_num(1, false);
        rec.D = field_num(2, false);
        const double N = field_num(3, true);
        const double NG = field_num(4, true);
        if (!std::isnan(N)) rec.N = N;
        if (!std::isnan(NG)) rec.N_G = NG;
        const long flag = to_long("extinct_flag", fields[5]);
        if (flag != 0 && flag != 1)
            throw ConfigError("series file line " + std::to_string(lineno) + ": flag not 0/1");
        if (flag == 1 && !series.extinction_time) series.extinction_time = rec.t;
        if (!series.records.empty() && rec.t <= series.records.back().t)
            throw ConfigError("series file line " + std::to_string(lineno) +
                              ": times not increasing");
        series.records.push_back(rec);
    }
    if (series.records.size() < 2) throw ConfigError("series file: fewer than 2 records");
    series.t_end_requested = series.records.back().t;
    return series;
}

bool SimulateOutcome::all_passed() const { return all_pass(verdicts); }

SimulateOutcome run_simulate(const ExperimentConfig& cfg) {
    const Grid<double> grid = make_grid(cfg.params);
    ArrayX<double> u0;
    switch (cfg.initial) {
        case InitialKind::Eigenmode:
            u0 = eigenmode_data(grid, cfg.mode, cfg.amplitude);
            break;
        case InitialKind::Bump:
            u0 = bump_data(grid, cfg.center, cfg.width, cfg.amplitude);
            break;
        case InitialKind::Random:
            u0 = random_sign_changing(grid, cfg.seed, cfg.smoothness, cfg.amplitude);
            break;
        case InitialKind::Barenblatt: {
            const auto bp = [&] {
                try {
                    return barenblatt_params(cfg.params.p, cfg.params.q, cfg.params.n,
                                             cfg.barenblatt_C);
                } catch (const std::invalid_argument& ex) {
                    throw ConfigError(ex.what());
                }
            }();
            u0 = barenblatt_data(grid, bp, cfg.barenblatt_t0);
            break;
        }
        case InitialKind::Zero:
            u0 = ArrayX<double>::Zero(grid.cells());
            break;
        case InitialKind::Table:
            u0 = load_table(cfg.table_path, grid.cells());
            break;
    }

    SimulateOutcome out;
    out.trivial = !(u0.abs().maxCoeff() > 0);

    std::optional<PerturbationSpec<double>> pert;
    if (cfg.perturbation_c) {
        const double c = *cfg.perturbation_c;
        const double C = cfg.perturbation_bound;
        pert = PerturbationSpec<double>{[c](double) { return c; }, [C](double) { return C; }};
    }

    auto result = evolve(Field<double>{u0, cfg.t_start}, {cfg.t_start, cfg.t_end}, cfg.params,
                         grid, cfg.scheme, pert, cfg.record_every);
    out.series = std::move(result.series);

    std::optional<double> env;
    if (cfg.perturbation_c) env = cfg.perturbation_bound;
    CheckRun run = evaluate_checks(out.series, cfg.checks, cfg.tol, env);
    out.verdicts = run.verdicts;

    if (!cfg.series_path.empty()) write_series_csv(cfg.series_path, out.series);

    std::ostringstream os;
    os << "format = parafreq-report-1\n";
    os << "tool.version = 1.0.0\n";
    os << "command = simulate\n";
    for (const auto& kvp : cfg.echo) os << "config." << kvp.first << " = " << kvp.second << "\n";
    os << "series.file = " << (cfg.series_path.empty() ? "-" : cfg.series_path) << "\n";
    os << "series.records = " << out.series.records.size() << "\n";
    os << "series.undefined = " << count_undefined(out.series) << "\n";
    os << "series.trivial = " << (out.trivial ? 1 : 0) << "\n";
    os << "series.extinct = " << (out.series.extinction_time ? 1 : 0) << "\n";
    if (out.series.extinction_time)
        os << "series.extinction_time = " << format_g17(*out.series.extinction_time) << "\n";
    append_check_lines(os, run);
    os << "result.pass = " << (out.all_passed() ? 1 : 0) << "\n";
    out.report_text = os.str();

    if (!cfg.report_path.empty()) write_text(cfg.report_path, out.report_text);
    return out;
}

std::vector<BarenblattTableRow> barenblatt_table(int n, double p, double q, double C,
                                                 const std::vector<double>& t_list) {
    if (t_list.empty()) throw ConfigError("barenblatt table: no sample times given");
    const auto bp = [&] {
        try {
            return barenblatt_params(p, q, n, C);
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(ex.what());
        }
    }();
    const double A = barenblatt_A_quadrature(bp);
    std::vector<BarenblattTableRow> rows;
    for (double t : t_list) {
        if (!(t > 0)) throw ConfigError("barenblatt table: times must be positive");
        BarenblattTableRow row;
        row.t = t;
        row.I_closed = barenblatt_I(bp, t, A);
        row.I_quadrature = barenblatt_I_quadrature(bp, t);
        row.N_closed = barenblatt_N(bp, t);
        const double scale = std::pow(t, 1.0 / bp.beta);
        const double r_outer = bp.delta > 0 ? 1.25 * bp.xi0 * scale : 8.0 * scale;
        row.residual_norm = barenblatt_residual(bp, t, r_outer, 256);
        rows.push_back(row);
    }
    return rows;
}

std::string barenblatt_table_csv(const std::vector<BarenblattTableRow>& rows) {
    std::ostringstream os;
    os << "t,I_closed,I_quadrature,N_closed,residual_norm\n";
    for (const auto& row : rows)
        os << format_g17(row.t) << ',' << format_g17(row.I_closed) << ','
           << format_g17(row.I_quadrature) << ',' << format_g17(row.N_closed) << ','
           << format_g17(row.residual_norm) << "\n";
    return os.str();
}

SpectralOutcome run_spectral(const SpectralRunConfig& cfg) {
    if (cfg.samples < 5) throw ConfigError("spectral: need at least 5 samples");
    if (cfg.t_max > 0) throw ConfigError("spectral: ancient solutions need t_max <= 0");
    if (!(cfg.t_min < cfg.t_max)) throw ConfigError("spectral: need t_min < t_max");
    SpectralSolution<double> sol;
    sol.length = cfg.length;
    sol.modes = cfg.modes;
    try {
        sol.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }

    // A short window cannot distinguish the growth laws; stretch to ~10
    // e-foldings of the slowest excited mode.
    double t_min = cfg.t_min;
    const double needed = recommended_horizon(sol);
    const bool extended = cfg.t_max - t_min < needed;
    if (extended) t_min = cfg.t_max - needed;

    std::vector<double> times(std::size_t(cfg.samples));
    for (int i = 0; i < cfg.samples; ++i)
        times[std::size_t(i)] =
            t_min + (cfg.t_max - t_min) * double(i) / double(cfg.samples - 1);
    times.back() = cfg.t_max;

    SpectralOutcome out;
    out.series = spectral_series(sol, times);
    out.growth = growth_classify(out.series);

    if (!cfg.series_path.empty()) write_series_csv(cfg.series_path, out.series);

    std::ostringstream os;
    os << "format = parafreq-report-1\n";
    os << "tool.version = 1.0.0\n";
    os << "command = spectral\n";
    os << "config.length = " << format_g17(cfg.length) << "\n";
    for (const auto& m : sol.modes)
        os << "config.mode." << m.k << " = " << format_g17(m.amplitude) << "\n";
    os << "config.t_min = " << format_g17(cfg.t_min) << "\n";
    os << "config.t_max = " << format_g17(cfg.t_max) << "\n";
    os << "config.samples = " << cfg.samples << "\n";
    os << "horizon.extended = " << (extended ? 1 : 0) << "\n";
    os << "horizon.t_min = " << format_g17(t_min) << "\n";
    os << "series.file = " << (cfg.series_path.empty() ? "-" : cfg.series_path) << "\n";
    os << "series.records = " << out.series.records.size() << "\n";
    os << "growth.kind = "
       << (out.growth.kind == GrowthKind::Exponential ? "exponential" : "polynomial") << "\n";
    os << "growth.rate = " << format_g17(out.growth.rate) << "\n";
    os << "growth.rss_exponential = " << format_g17(out.growth.rss_exponential) << "\n";
    os << "growth.rss_polynomial = " << format_g17(out.growth.rss_polynomial) << "\n";
    out.report_text = os.str();
    return out;
}

bool VerifyOutcome::all_passed() const { return all_pass(verdicts); }

VerifyOutcome run_verify(const std::string& csv_path, double p, double q, int scheme_order,
                         const std::vector<CheckKind>& checks, CheckTolerance<double> tol) {
    for (CheckKind kind : checks)
        if (kind == CheckKind::AlmostMonotonicity)
            throw ConfigError("verify: almost_monotonicity needs a live perturbation envelope; "
                              "run it through simulate");
    try {
        delta_of(p, q);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
    VerifyOutcome out;
    const auto series = read_series_csv(csv_path, p, q, scheme_order);
    out.records = series.records.size();
    out.undefined_records = count_undefined(series);
    CheckRun run = evaluate_checks(series, checks, tol, std::nullopt);
    out.verdicts = run.verdicts;

    std::ostringstream os;
    os << "format = parafreq-report-1\n";
    os << "tool.version = 1.0.0\n";
    os << "command = verify\n";
    os << "config.p = " << format_g17(p) << "\n";
    os << "config.q = " << format_g17(q) << "\n";
    os << "config.order = " << scheme_order << "\n";
    os << "series.file = " << csv_path << "\n";
    os << "series.records = " << out.records << "\n";
    os << "series.undefined = " << out.undefined_records << "\n";
    append_check_lines(os, run);
    os << "result.pass = " << (out.all_passed() ? 1 : 0) << "\n";
    out.report_text = os.str();
    return out;
}

SweepAxis parse_axis(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("axis '" + spec + "': expected key=values");
    SweepAxis axis;
    axis.key = trim(spec.substr(0, eq));
    const std::string body = trim(spec.substr(eq + 1));
    if (body.empty()) throw ConfigError("axis '" + spec + "': empty value list");
    if (body.find(':') != std::string::npos) {
        const auto parts = split(body, ':');
        if (parts.size() == 2) {
            const long a = to_long(axis.key, parts[0]);
            const long b = to_long(axis.key, parts[1]);
            if (b < a) throw ConfigError("axis '" + spec + "': descending range");
            for (long v = a; v <= b; ++v) axis.values.push_back(std::to_string(v));
        } else if (parts.size() == 3) {
            const double a = to_double(axis.key, parts[0]);
            const double b = to_double(axis.key, parts[1]);
            const double step = to_double(axis.key, parts[2]);
            if (!(step > 0)) throw ConfigError("axis '" + spec + "': step must be positive");
            for (double v = a; v <= b + step / 2; v += step)
                axis.values.push_back(format_g17(v));
        } else {
            throw ConfigError("axis '" + spec + "': ranges are a:b or a:b:step");
        }
    } else {
        for (const std::string& raw : split(body, ',')) {
            const std::string v = trim(raw);
            if (v.empty()) throw ConfigError("axis '" + spec + "': empty entry");
            axis.values.push_back(v);
        }
    }
    return axis;
}

SweepOutcome run_sweep(const KeyValueMap& template_map, const std::vector<SweepAxis>& axes,
                       const std::string& out_dir) {
    config_from_map(template_map);  // fail fast on a broken template
    std::size_t n_cells = 1;
    for (const auto& axis : axes) {
        if (axis.values.empty()) throw ConfigError("axis '" + axis.key + "': no values");
        if (!known_keys().count(axis.key))
            throw ConfigError("axis '" + axis.key + "': unknown config key");
        n_cells *= axis.values.size();
    }
    if (n_cells == 0 || n_cells > 100000) throw ConfigError("sweep: unreasonable cell count");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ConfigError("sweep: cannot create output dir '" + out_dir + "'");

    auto cell_tag = [](std::size_t idx) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "cell_%04zu", idx);
        return std::string(buf);
    };

    // Last axis varies fastest.
    std::vector<SweepCellResult> cells(n_cells);
    std::vector<KeyValueMap> cell_maps(n_cells);
    for (std::size_t idx = 0; idx < n_cells; ++idx) {
        KeyValueMap kv = template_map;
        std::size_t rem = idx;
        for (std::size_t a = axes.size(); a-- > 0;) {
            const auto& axis = axes[a];
            const std::string& v = axis.values[rem % axis.values.size()];
            rem /= axis.values.size();
            kv[axis.key] = v;
            cells[idx].assignments[axis.key] = v;
        }
        kv["output.series"] = out_dir + "/" + cell_tag(idx) + ".csv";
        kv["output.report"] = out_dir + "/" + cell_tag(idx) + "_report.txt";
        cell_maps[idx] = std::move(kv);
    }

    const unsigned n_threads = std::min<std::size_t>(sweep_thread_cap(), n_cells);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= n_cells) return;
            try {
                const auto outcome = run_simulate(config_from_map(cell_maps[idx]));
                cells[idx].status = outcome.all_passed() ? 0 : 1;
            } catch (const std::exception& ex) {
                cells[idx].status = 2;
                cells[idx].message = ex.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    SweepOutcome out;
    out.cells = cells;
    std::size_t passed = 0, failed = 0, errored = 0;
    for (const auto& cell : cells) {
        if (cell.status == 0) ++passed;
        else if (cell.status == 1) ++failed;
        else ++errored;
    }
    out.exit_code = errored ? 2 : (failed ? 1 : 0);

    std::ostringstream os;
    os << "format = parafreq-sweep-1\n";
    os << "tool.version = 1.0.0\n";
    os << "command = sweep\n";
    os << "axes =";
    for (std::size_t a = 0; a < axes.size(); ++a) os << (a ? "," : " ") << axes[a].key;
    os << "\n";
    os << "cells = " << n_cells << "\n";
    for (std::size_t idx = 0; idx < n_cells; ++idx) {
        const auto tag = cell_tag(idx);
        for (const auto& kvp : cells[idx].assignments)
            os << "cell." << tag << ".assign." << kvp.first << " = " << kvp.second << "\n";
        os << "cell." << tag << ".status = " << cells[idx].status << "\n";
        if (!cells[idx].message.empty())
            os << "cell." << tag << ".error = " << cells[idx].message << "\n";
    }
    os << "aggregate.pass_count = " << passed << "\n";
    os << "aggregate.fail_count = " << failed << "\n";
    os << "aggregate.error_count = " << errored << "\n";
    os << "result.pass = " << (out.exit_code == 0 ? 1 : 0) << "\n";
    out.report_text = os.str();
    write_text(out_dir + "/sweep_report.txt", out.report_text);
    return out;
}

}  // namespace experiment
}  // namespace parafreq
