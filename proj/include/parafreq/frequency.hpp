#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "parafreq/grid.hpp"
#include "parafreq/plaplacian.hpp"
#include "parafreq/power.hpp"
#include "parafreq/problem.hpp"

namespace parafreq {

/// One diagnostic sample along a trajectory.
///   I   = integral |u|^{q+1} e^{-phi} dV          (>= 0)
///   D   = -integral |grad u^q|^p e^{-phi} dV      (<= 0)
///   N   = D / I                                    frequency
///   N_G = D / I^{pq/(q+1)}                         generalized frequency
/// N and N_G are an explicit "undefined" state (not NaN) when I = 0.
template <class Scalar = double>
struct FrequencyRecord {
    Scalar t = 0;
    Scalar I = 0;
    Scalar D = 0;
    std::optional<Scalar> N;
    std::optional<Scalar> N_G;
};

template <class Scalar = double>
struct FrequencySeries {
    ProblemParams<Scalar> params;
    std::vector<FrequencyRecord<Scalar>> records;
    /// Formal accuracy order of the producing integrator (4 RK4, 1 Euler);
    /// closed-form series use a large value so only atol applies.
    int scheme_order = 4;
    std::optional<Scalar> extinction_time;
    /// End of the requested time span (the series may stop early at extinction).
    Scalar t_end_requested = std::numeric_limits<Scalar>::quiet_NaN();

    Scalar delta() const { return params.delta(); }
};

template <class Derived, class Scalar>
Scalar energy_I(const Eigen::ArrayBase<Derived>& u, const Grid<Scalar>& grid, Scalar q) {
    if (!(q > Scalar(0))) throw std::invalid_argument("energy_I: requires q > 0");
    return (abs_power(u, q + Scalar(1)) * grid.cell_weights).sum();
}

/// Shares face weights with apply_operator, so dI/dt = (q+1) D is exact for
/// the semi-discrete flow (eps_reg = 0).
template <class Derived, class Scalar>
Scalar dissipation_D(const Eigen::ArrayBase<Derived>& u, const Grid<Scalar>& grid, Scalar p,
                     Scalar q) {
    if (!(p > Scalar(1))) throw std::invalid_argument("dissipation_D: requires p > 1");
    return -gradient_energy(signed_power(u, q), grid, p);
}

template <class Derived, class Scalar>
FrequencyRecord<Scalar> frequency(const Eigen::ArrayBase<Derived>& u, const Grid<Scalar>& grid,
                                  Scalar p, Scalar q, Scalar t = Scalar(0)) {
    FrequencyRecord<Scalar> rec;
    rec.t = t;
    rec.I = energy_I(u, grid, q);
    rec.D = dissipation_D(u, grid, p, q);
    if (rec.I > Scalar(0)) {
        rec.N = rec.D / rec.I;
        rec.N_G = rec.D / std::pow(rec.I, p * q / (q + Scalar(1)));
    }
    return rec;
}

/// Outcome of one inequality/identity check. `worst_violation` is normalized
/// per check (documented at each check); negative or small positive values up
/// to `tolerance` pass. `location_t` is where the worst violation occurred.
template <class Scalar = double>
struct Verdict {
    std::string name;
    bool passed = false;
    Scalar worst_violation = 0;
    Scalar location_t = 0;
    Scalar tolerance = 0;
};

/// Tolerance model: tol = atol + ctol * (rate * max_gap)^r with
/// rate = (q+1) max|N| (the fastest decay rate of I over the window) and
/// r = min(scheme order, 2). The quadratic branch is the 3-point
/// finite-difference error; the linear branch covers implicit-Euler level
/// error. ctol = 2 was calibrated on the heat eigenmode, whose measured
/// central-difference defect is (rate*gap)^2 / 6.
template <class Scalar = double>
struct CheckTolerance {
    Scalar atol = Scalar(1e-6);
    Scalar ctol = Scalar(2);
};

namespace detail {

template <class Scalar>
struct SeriesWindow {
    std::vector<Scalar> t, I, D, N, N_G;
    Scalar rate = 0;      // (q+1) * max |N|
    Scalar max_gap = 0;
};

/// Prefix of records with defined frequency (I > 0).
template <class Scalar>
SeriesWindow<Scalar> defined_window(const FrequencySeries<Scalar>& s) {
    SeriesWindow<Scalar> w;
    const Scalar q = s.params.q;
    for (const auto& r : s.records) {
        if (!r.N) break;
        w.t.push_back(r.t);
        w.I.push_back(r.I);
        w.D.push_back(r.D);
        w.N.push_back(*r.N);
        w.N_G.push_back(*r.N_G);
    }
    Scalar max_abs_n = 0;
    for (Scalar v : w.N) max_abs_n = std::max(max_abs_n, std::abs(v));
    w.rate = (q + Scalar(1)) * max_abs_n;
    for (std::size_t k = 1; k < w.t.size(); ++k)
        w.max_gap = std::max(w.max_gap, w.t[k] - w.t[k - 1]);
    return w;
}

template <class Scalar>
Scalar effective_tol(const FrequencySeries<Scalar>& s, const SeriesWindow<Scalar>& w,
                     const CheckTolerance<Scalar>& tol) {
    const int r = std::min(s.scheme_order, 2);
    return tol.atol + tol.ctol * std::pow(w.rate * w.max_gap, Scalar(r));
}

/// 3-point first derivative at the middle of a nonuniform stencil.
template <class Scalar>
Scalar deriv1(Scalar t0, Scalar f0, Scalar t1, Scalar f1, Scalar t2, Scalar f2) {
    const Scalar dm = t1 - t0, dp = t2 - t1;
    return (dm * dm * f2 - dp * dp * f0 + (dp * dp - dm * dm) * f1) / (dm * dp * (dm + dp));
}

/// 3-point second derivative at the middle of a nonuniform stencil.
template <class Scalar>
Scalar deriv2(Scalar t0, Scalar f0, Scalar t1, Scalar f1, Scalar t2, Scalar f2) {
    const Scalar dm = t1 - t0, dp = t2 - t1;
    return Scalar(2) * (dm * f2 + dp * f0 - (dm + dp) * f1) / (dm * dp * (dm + dp));
}

template <class Scalar>
void fold_worst(Verdict<Scalar>& v, Scalar violation, Scalar t) {
    if (violation > v.worst_violation) {
        v.worst_violation = violation;
        v.location_t = t;
    }
}

template <class Scalar>
Verdict<Scalar> finish(Verdict<Scalar> v, Scalar tol) {
    v.tolerance = tol;
    v.passed = v.worst_violation <= tol;
    return v;
}

}  // namespace detail

/// Identity dI/dt = (q+1) D checked by nonuniform central differences.
/// Violation at a record: |dI_fd - (q+1)D| / (I * max(rate, 1)).
template <class Scalar>
Verdict<Scalar> check_identity_I_prime(const FrequencySeries<Scalar>& s,
                                       CheckTolerance<Scalar> tol = {}) {
    const auto w = detail::defined_window(s);
    Verdict<Scalar> v{"identity_I_prime", true, 0, 0, 0};
    const Scalar q = s.params.q;
    const Scalar denom_rate = std::max(w.rate, Scalar(1));
    for (std::size_t k = 1; k + 1 < w.t.size(); ++k) {
        const Scalar dI = detail::deriv1(w.t[k - 1], w.I[k - 1], w.t[k], w.I[k], w.t[k + 1],
                                         w.I[k + 1]);
        const Scalar viol = std::abs(dI - (q + Scalar(1)) * w.D[k]) / (w.I[k] * denom_rate);
        detail::fold_worst(v, viol, w.t[k]);
    }
    return detail::finish(v, detail::effective_tol(s, w, tol));
}

/// Monotonicity bundle.
///  [0] N_G non-decreasing: violation (N_G[k] - N_G[k+1]) / max(1, max|N_G|).
///  [1] N' >= delta N^2:    violation (delta N^2 - N'_fd) / max(1, (q+1) max N^2).
///  [2] only when delta >= 0, N non-decreasing:
///                          violation (N[k] - N[k+1]) / max(1, max|N|).
template <class Scalar>
std::vector<Verdict<Scalar>> check_monotonicity(const FrequencySeries<Scalar>& s,
                                                CheckTolerance<Scalar> tol = {}) {
    const auto w = detail::defined_window(s);
    const Scalar q = s.params.q;
    const Scalar delta = s.delta();
    const Scalar tol_eff = detail::effective_tol(s, w, tol);

    Scalar max_ng = 0, max_n = 0;
    for (Scalar x : w.N_G) max_ng = std::max(max_ng, std::abs(x));
    for (Scalar x : w.N) max_n = std::max(max_n, std::abs(x));
    const Scalar scale_ng = std::max(Scalar(1), max_ng);
    const Scalar scale_n = std::max(Scalar(1), max_n);
    const Scalar scale_rate = std::max(Scalar(1), (q + Scalar(1)) * max_n * max_n);

    Verdict<Scalar> vg{"monotonicity.N_G", true, 0, 0, 0};
    Verdict<Scalar> vp{"monotonicity.N_prime", true, 0, 0, 0};
    Verdict<Scalar> vn{"monotonicity.N", true, 0, 0, 0};
    for (std::size_t k = 0; k + 1 < w.t.size(); ++k) {
        detail::fold_worst(vg, (w.N_G[k] - w.N_G[k + 1]) / scale_ng, w.t[k + 1]);
        if (delta >= Scalar(0))
            detail::fold_worst(vn, (w.N[k] - w.N[k + 1]) / scale_n, w.t[k + 1]);
    }
    for (std::size_t k = 1; k + 1 < w.t.size(); ++k) {
        const Scalar dN = detail::deriv1(w.t[k - 1], w.N[k - 1], w.t[k], w.N[k], w.t[k + 1],
                                         w.N[k + 1]);
        detail::fold_worst(vp, (delta * w.N[k] * w.N[k] - dN) / scale_rate, w.t[k]);
    }
    std::vector<Verdict<Scalar>> out;
    out.push_back(detail::finish(vg, tol_eff));
    out.push_back(detail::finish(vp, tol_eff));
    if (delta >= Scalar(0)) out.push_back(detail::finish(vn, tol_eff));
    return out;
}

/// Convexity of the regime transform: log I for delta = 0, else
/// -delta^{-1} I^{-delta/(q+1)}. Violation: -f''_fd normalized by
/// max(1, max|f|) * max(1, rate^2).
template <class Scalar>
Verdict<Scalar> check_convexity(const FrequencySeries<Scalar>& s, CheckTolerance<Scalar> tol = {}) {
    const auto w = detail::defined_window(s);
    const Scalar q = s.params.q;
    const Scalar delta = s.delta();
    std::vector<Scalar> f(w.t.size());
    for (std::size_t k = 0; k < w.t.size(); ++k) {
        f[k] = (delta == Scalar(0)) ? std::log(w.I[k])
                                    : -std::pow(w.I[k], -delta / (q + Scalar(1))) / delta;
    }
    Scalar max_f = 0;
    for (Scalar x : f) max_f = std::max(max_f, std::abs(x));
    const Scalar scale = std::max(Scalar(1), max_f) * std::max(Scalar(1), w.rate * w.rate);

    Verdict<Scalar> v{"convexity", true, 0, 0, 0};
    for (std::size_t k = 1; k + 1 < w.t.size(); ++k) {
        const Scalar f2 = detail::deriv2(w.t[k - 1], f[k - 1], w.t[k], f[k], w.t[k + 1], f[k + 1]);
        detail::fold_worst(v, -f2 / scale, w.t[k]);
    }
    return detail::finish(v, detail::effective_tol(s, w, tol));
}

/// Greatest admissible extinction-free horizon for delta < 0:
/// b0 = min{ 1/(N_a * delta) + a, b }. For delta >= 0 returns b (no finite
/// extinction barrier).
template <class Scalar>
Scalar extinction_lower_bound(Scalar N_a, Scalar delta, Scalar a, Scalar b) {
    if (!(N_a < Scalar(0)))
        throw std::invalid_argument("extinction_lower_bound: requires N(a) < 0");
    if (!(b >= a)) throw std::invalid_argument("extinction_lower_bound: requires b >= a");
    if (delta >= Scalar(0)) return b;
    return std::min(Scalar(1) / (N_a * delta) + a, b);
}

/// Backward-uniqueness lower bounds seeded at record `a_index`:
///   delta >= 0: I(t) >= I(a) exp((q+1) N(a) (t-a))
///   delta <  0: I(t) >= I(a) (1 / (1 - delta (t-a) N(a)))^{(q+1)/delta}, t < b0.
/// Violation: (bound - I) / bound (multiplicative defect).
template <class Scalar>
Verdict<Scalar> lower_bound_I(const FrequencySeries<Scalar>& s, std::size_t a_index = 0,
                              CheckTolerance<Scalar> tol = {}) {
    const auto w = detail::defined_window(s);
    if (a_index + 1 >= w.t.size())
        throw std::invalid_argument("lower_bound_I: reference index out of series");
    const Scalar q = s.params.q;
    const Scalar delta = s.delta();
    const Scalar a = w.t[a_index], Ia = w.I[a_index], Na = w.N[a_index];

    Verdict<Scalar> v{"lower_bound_I", true, 0, 0, 0};
    Scalar b0 = std::numeric_limits<Scalar>::infinity();
    if (delta < Scalar(0) && Na < Scalar(0))
        b0 = Scalar(1) / (Na * delta) + a;

    for (std::size_t k = a_index + 1; k < w.t.size(); ++k) {
        const Scalar dtk = w.t[k] - a;
        Scalar bound;
        if (delta >= Scalar(0)) {
            bound = Ia * std::exp((q + Scalar(1)) * Na * dtk);
        } else {
            if (!(w.t[k] < b0)) break;
            bound = Ia * std::pow(Scalar(1) / (Scalar(1) - delta * dtk * Na),
                                  (q + Scalar(1)) / delta);
        }
        detail::fold_worst(v, (bound - w.I[k]) / bound, w.t[k]);
    }
    return detail::finish(v, detail::effective_tol(s, w, tol));
}

/// Fast-diffusion extinction-time bound: measured extinction (if any) must not
/// precede b0 computed from the series' own N at record `a_index`. Violation:
/// (b0 - T_ext) / max(b0 - a, tiny).
template <class Scalar>
Verdict<Scalar> check_extinction_time(const FrequencySeries<Scalar>& s, std::size_t a_index = 0,
                                      CheckTolerance<Scalar> tol = {}) {
    const auto w = detail::defined_window(s);
    if (a_index >= w.t.size())
        throw std::invalid_argument("check_extinction_time: reference index out of series");
    const Scalar delta = s.delta();
    const Scalar a = w.t[a_index];
    const Scalar end = std::isnan(double(s.t_end_requested)) ? s.records.back().t
                                                             : s.t_end_requested;
    const Scalar b0 = extinction_lower_bound(w.N[a_index], delta, a, end);
    Verdict<Scalar> v{"extinction.time_bound", true, 0, 0, 0};
    const Scalar measured = s.extinction_time ? *s.extinction_time : end;
    v.worst_violation = (b0 - measured) / std::max(b0 - a, Scalar(1e-300));
    v.location_t = measured;
    return detail::finish(v, detail::effective_tol(s, w, tol));
}

/// Least-squares slope of y against x.
template <class Scalar>
Scalar lsq_slope(const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("lsq_slope: need >= 2 samples");
    Scalar mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= Scalar(x.size());
    my /= Scalar(x.size());
    Scalar sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == Scalar(0)) throw std::invalid_argument("lsq_slope: degenerate abscissae");
    return sxy / sxx;
}

template <class Scalar = double>
struct VanishingOrder {
    Scalar k_hat = 0;   // fitted decay order of I: I ~ (t - a + 1)^{-k_hat}
    Verdict<Scalar> bound;  // k_hat <= (q+1)/delta
};

/// Slow-diffusion vanishing order: regression of log I against log(t - a + 1)
/// over the final decade of the window. Requires delta > 0 and a horizon
/// spanning at least one decade.
template <class Scalar>
VanishingOrder<Scalar> vanishing_order(const FrequencySeries<Scalar>& s, std::size_t a_index = 0,
                                       Scalar bound_tol = Scalar(0.01)) {
    const auto w = detail::defined_window(s);
    const Scalar q = s.params.q;
    const Scalar delta = s.delta();
    if (!(delta > Scalar(0)))
        throw std::invalid_argument("vanishing_order: requires slow diffusion (delta > 0)");
    if (a_index + 2 >= w.t.size())
        throw std::invalid_argument("vanishing_order: reference index out of series");
    const Scalar a = w.t[a_index];
    const Scalar span = w.t.back() - a + Scalar(1);
    if (!(span >= Scalar(10)))
        throw std::invalid_argument("vanishing_order: horizon must span at least one decade");
    std::vector<Scalar> xs, ys;
    for (std::size_t k = a_index; k < w.t.size(); ++k) {
        const Scalar shifted = w.t[k] - a + Scalar(1);
        if (shifted * Scalar(10) < span) continue;  // final decade only
        xs.push_back(std::log(shifted));
        ys.push_back(std::log(w.I[k]));
    }
    VanishingOrder<Scalar> out;
    out.k_hat = -lsq_slope(xs, ys);
    out.bound.name = "vanishing_order.bound";
    out.bound.worst_violation = (out.k_hat - (q + Scalar(1)) / delta) /
                                std::max(Scalar(1), (q + Scalar(1)) / delta);
    out.bound.location_t = w.t.back();
    out.bound = detail::finish(out.bound, bound_tol);
    return out;
}

/// Perturbed-flow ("almost monotonicity") bundle for |d_t u - L u^q| bounded
/// with envelope C(t).
///  [0] d/dt log I >= (q+1+C) N - (2q+3/2) C,  violation / max(1, rate)
///  [1] N' >= pq/(q+1) C^2 (N - q - 1/2),      violation / max(1, (q+1) max N^2)
///  [2] endpoint bound
///      I(b) >= I(a) exp((b-a)(q+1+sup C)[e^K (N(a)-q-1/2) - q - 1]),
///      K = integral_a^b pq/(q+1) C^2; violation (bound - I(b)) / bound.
template <class Scalar, class CFn>
std::vector<Verdict<Scalar>> almost_monotonicity_check(const FrequencySeries<Scalar>& s,
                                                       CFn&& C_of_t,
                                                       CheckTolerance<Scalar> tol = {}) {
    const auto w = detail::defined_window(s);
    const Scalar q = s.params.q;
    const Scalar p = s.params.p;
    const Scalar tol_eff = detail::effective_tol(s, w, tol);

    Scalar max_n = 0;
    for (Scalar x : w.N) max_n = std::max(max_n, std::abs(x));
    const Scalar scale1 = std::max(Scalar(1), w.rate);
    const Scalar scale2 = std::max(Scalar(1), (q + Scalar(1)) * max_n * max_n);

    Verdict<Scalar> v1{"almost_monotonicity.logI_rate", true, 0, 0, 0};
    Verdict<Scalar> v2{"almost_monotonicity.N_rate", true, 0, 0, 0};
    for (std::size_t k = 1; k + 1 < w.t.size(); ++k) {
        const Scalar C = C_of_t(w.t[k]);
        const Scalar dlogI = detail::deriv1(w.t[k - 1], std::log(w.I[k - 1]), w.t[k],
                                            std::log(w.I[k]), w.t[k + 1], std::log(w.I[k + 1]));
        const Scalar rhs1 = (q + Scalar(1) + C) * w.N[k] - (Scalar(2) * q + Scalar(1.5)) * C;
        detail::fold_worst(v1, (rhs1 - dlogI) / scale1, w.t[k]);

        const Scalar dN = detail::deriv1(w.t[k - 1], w.N[k - 1], w.t[k], w.N[k], w.t[k + 1],
                                         w.N[k + 1]);
        const Scalar rhs2 = p * q / (q + Scalar(1)) * C * C * (w.N[k] - q - Scalar(0.5));
        detail::fold_worst(v2, (rhs2 - dN) / scale2, w.t[k]);
    }

    // Endpoint bound over the full window.
    Scalar supC = 0, K = 0;
    for (std::size_t k = 0; k < w.t.size(); ++k) supC = std::max(supC, std::abs(C_of_t(w.t[k])));
    for (std::size_t k = 1; k < w.t.size(); ++k) {
        const Scalar Cl = C_of_t(w.t[k - 1]), Cr = C_of_t(w.t[k]);
        K += (w.t[k] - w.t[k - 1]) * (Cl * Cl + Cr * Cr) / Scalar(2);
    }
    K *= p * q / (q + Scalar(1));
    const Scalar a = w.t.front(), b = w.t.back();
    const Scalar bound = w.I.front() *
                         std::exp((b - a) * (q + Scalar(1) + supC) *
                                  (std::exp(K) * (w.N.front() - q - Scalar(0.5)) - q - Scalar(1)));
    Verdict<Scalar> v3{"almost_monotonicity.I_lower", true, 0, b, 0};
    v3.worst_violation = (bound - w.I.back()) / bound;

    return {detail::finish(v1, tol_eff), detail::finish(v2, tol_eff),
            detail::finish(v3, tol_eff)};
}

}  // namespace parafreq
