#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "parafreq/frequency.hpp"
#include "parafreq/grid.hpp"
#include "parafreq/plaplacian.hpp"
#include "parafreq/power.hpp"
#include "parafreq/problem.hpp"
#include "parafreq/quadrature.hpp"

namespace parafreq {

/// Source-type self-similar solution of du/dt = div(|grad u^q|^{p-2} grad u^q)
/// on R^n:
///   u(t, x) = t^{-n/beta} F(xi),   xi = |x| t^{-1/beta},
///   delta != 0:  F(xi) = (C - kappa xi^{p/(p-1)})_+^{gamma}
///   delta == 0:  F(xi) = C exp(-zeta xi^{p/(p-1)})
/// with
///   beta = p + n delta,  gamma = (p-1)/delta,
///   kappa = (delta/(p q)) beta^{-1/(p-1)},  zeta = (p-1)^2 p^{-p/(p-1)}.
/// Valid only for beta > 0; compact support (radius xi0 t^{1/beta},
/// xi0 = (C/kappa)^{(p-1)/p}) when delta > 0, positive with algebraic tail
/// when delta < 0.
template <class Scalar = double>
struct BarenblattParams {
    Scalar p = 2, q = 1;
    int n = 1;
    Scalar C = 1;

    Scalar delta = 0, beta = 0, gamma = 0, kappa = 0, zeta = 0;
    /// Support radius in the similarity variable (infinite for delta <= 0).
    Scalar xi0 = std::numeric_limits<Scalar>::infinity();

    Scalar exponent_s() const { return p / (p - 1); }
};

template <class Scalar>
BarenblattParams<Scalar> barenblatt_params(Scalar p, Scalar q, int n, Scalar C) {
    if (n < 1) throw std::invalid_argument("barenblatt_params: n >= 1 required");
    if (!(C > Scalar(0))) throw std::invalid_argument("barenblatt_params: C > 0 required");
    BarenblattParams<Scalar> bp;
    bp.p = p;
    bp.q = q;
    bp.n = n;
    bp.C = C;
    bp.delta = delta_of(p, q);
    bp.beta = p + Scalar(n) * bp.delta;
    if (!(bp.beta > Scalar(0)))
        throw std::invalid_argument(
            "barenblatt_params: beta = p + n delta must be positive (profile undefined for "
            "delta <= -p/n)");
    bp.zeta = (p - 1) * (p - 1) * std::pow(p, -p / (p - 1));
    if (bp.delta != Scalar(0)) {
        bp.gamma = (p - 1) / bp.delta;
        bp.kappa = bp.delta / (p * q) * std::pow(bp.beta, Scalar(-1) / (p - 1));
        if (bp.delta > Scalar(0)) bp.xi0 = std::pow(C / bp.kappa, (p - 1) / p);
    }
    return bp;
}

/// Similarity profile F(xi) (>= 0).
template <class Scalar>
Scalar barenblatt_profile(const BarenblattParams<Scalar>& bp, Scalar xi) {
    if (xi < Scalar(0)) throw std::invalid_argument("barenblatt_profile: xi >= 0");
    const Scalar s = bp.exponent_s();
    if (bp.delta == Scalar(0)) return bp.C * std::exp(-bp.zeta * std::pow(xi, s));
    const Scalar base = bp.C - bp.kappa * std::pow(xi, s);
    if (base <= Scalar(0)) return Scalar(0);  // only reachable for delta > 0
    return std::pow(base, bp.gamma);
}

/// dF/dxi, analytic.
template <class Scalar>
Scalar barenblatt_profile_prime(const BarenblattParams<Scalar>& bp, Scalar xi) {
    if (xi <= Scalar(0)) return Scalar(0);
    const Scalar s = bp.exponent_s();
    if (bp.delta == Scalar(0))
        return -bp.zeta * s * std::pow(xi, s - 1) * barenblatt_profile(bp, xi);
    const Scalar base = bp.C - bp.kappa * std::pow(xi, s);
    if (base <= Scalar(0)) return Scalar(0);
    return -bp.gamma * std::pow(base, bp.gamma - 1) * bp.kappa * s * std::pow(xi, s - 1);
}

template <class Scalar>
Scalar barenblatt_eval(const BarenblattParams<Scalar>& bp, Scalar t, Scalar r) {
    if (!(t > Scalar(0))) throw std::invalid_argument("barenblatt_eval: t > 0 required");
    if (r < Scalar(0)) throw std::invalid_argument("barenblatt_eval: r >= 0 required");
    const Scalar xi = r * std::pow(t, Scalar(-1) / bp.beta);
    return std::pow(t, -Scalar(bp.n) / bp.beta) * barenblatt_profile(bp, xi);
}

/// Analytic du/dt = -t^{-n/beta - 1} (n F + xi F') / beta.
template <class Scalar>
Scalar barenblatt_dudt(const BarenblattParams<Scalar>& bp, Scalar t, Scalar r) {
    if (!(t > Scalar(0))) throw std::invalid_argument("barenblatt_dudt: t > 0 required");
    const Scalar xi = r * std::pow(t, Scalar(-1) / bp.beta);
    const Scalar F = barenblatt_profile(bp, xi);
    const Scalar Fp = barenblatt_profile_prime(bp, xi);
    return -std::pow(t, -Scalar(bp.n) / bp.beta - 1) * (Scalar(bp.n) * F + xi * Fp) / bp.beta;
}

/// Similarity moment A = integral_0^inf F(xi)^{q+1} xi^{n-1} dxi by adaptive
/// quadrature (the delta > 0 integrand is cut at xi0).
template <class Scalar>
Scalar barenblatt_A_quadrature(const BarenblattParams<Scalar>& bp, Scalar rel_tol = Scalar(1e-12)) {
    auto f = [&](Scalar xi) {
        return std::pow(barenblatt_profile(bp, xi), bp.q + 1) *
               abs_power(xi, Scalar(bp.n - 1));
    };
    if (bp.delta > Scalar(0)) return integrate_adaptive<Scalar>(f, Scalar(0), bp.xi0, rel_tol);
    // Tail decay: algebraic ~ xi^{p(q+1)/delta} for delta < 0, stretched
    // exponential for delta == 0; split off [0, 1] so the doubling segments
    // start in the tail region.
    return integrate_adaptive<Scalar>(f, Scalar(0), Scalar(1), rel_tol) +
           integrate_to_infinity<Scalar>(f, Scalar(1), rel_tol);
}

/// Closed form of A in terms of Beta/Gamma functions:
///   delta > 0:  C^{gamma(q+1)} (C/kappa)^{n/s} (1/s) B(n/s, gamma(q+1) + 1)
///   delta = 0:  C^{q+1} (1/s) ((q+1) zeta)^{-n/s} Gamma(n/s)
///   delta < 0:  |kappa|^{-n/s} C^{n/s + gamma(q+1)} (1/s) B(n/s, -gamma(q+1) - n/s)
/// with s = p/(p-1).
template <class Scalar>
Scalar barenblatt_A_closed(const BarenblattParams<Scalar>& bp) {
    const Scalar s = bp.exponent_s();
    const Scalar a = Scalar(bp.n) / s;
    auto log_beta = [](Scalar x, Scalar y) {
        return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
    };
    if (bp.delta == Scalar(0)) {
        return std::pow(bp.C, bp.q + 1) / s * std::pow((bp.q + 1) * bp.zeta, -a) *
               std::tgamma(a);
    }
    const Scalar g = bp.gamma * (bp.q + 1);
    if (bp.delta > Scalar(0)) {
        return std::pow(bp.C, g) * std::pow(bp.C / bp.kappa, a) / s *
               std::exp(log_beta(a, g + 1));
    }
    const Scalar second = -g - a;
    if (!(second > Scalar(0)))
        throw std::domain_error("barenblatt_A_closed: moment diverges");
    return std::pow(-bp.kappa, -a) * std::pow(bp.C, a + g) / s * std::exp(log_beta(a, second));
}

/// I(t) = omega_n A t^{-n q / beta} with omega_n the sphere area.
template <class Scalar>
Scalar barenblatt_I(const BarenblattParams<Scalar>& bp, Scalar t, Scalar A) {
    if (!(t > Scalar(0))) throw std::invalid_argument("barenblatt_I: t > 0 required");
    return sphere_area<Scalar>(bp.n) * A * std::pow(t, -Scalar(bp.n) * bp.q / bp.beta);
}

template <class Scalar>
Scalar barenblatt_I(const BarenblattParams<Scalar>& bp, Scalar t) {
    return barenblatt_I(bp, t, barenblatt_A_quadrature(bp));
}

/// Direct radial quadrature of I(t), independent of the similarity
/// factorization (oracle for barenblatt_I).
template <class Scalar>
Scalar barenblatt_I_quadrature(const BarenblattParams<Scalar>& bp, Scalar t,
                               Scalar rel_tol = Scalar(1e-12)) {
    auto f = [&](Scalar r) {
        return std::pow(barenblatt_eval(bp, t, r), bp.q + 1) * abs_power(r, Scalar(bp.n - 1));
    };
    const Scalar t_pow = std::pow(t, Scalar(1) / bp.beta);
    Scalar radial;
    if (bp.delta > Scalar(0)) {
        radial = integrate_adaptive<Scalar>(f, Scalar(0), bp.xi0 * t_pow, rel_tol);
    } else {
        radial = integrate_adaptive<Scalar>(f, Scalar(0), t_pow, rel_tol) +
                 integrate_to_infinity<Scalar>(f, t_pow, rel_tol);
    }
    return sphere_area<Scalar>(bp.n) * radial;
}

/// N(t) = -n q / ((q+1) beta t); follows from I' = (q+1) D and the power law.
template <class Scalar>
Scalar barenblatt_N(const BarenblattParams<Scalar>& bp, Scalar t) {
    if (!(t > Scalar(0))) throw std::invalid_argument("barenblatt_N: t > 0 required");
    return -Scalar(bp.n) * bp.q / ((bp.q + 1) * bp.beta * t);
}

/// Closed-form frequency series sampled at the given times (increasing, > 0).
template <class Scalar>
FrequencySeries<Scalar> barenblatt_series(const BarenblattParams<Scalar>& bp,
                                          const std::vector<Scalar>& times) {
    if (times.empty()) throw std::invalid_argument("barenblatt_series: empty time list");
    const Scalar A = barenblatt_A_quadrature(bp);
    FrequencySeries<Scalar> series;
    series.params.p = bp.p;
    series.params.q = bp.q;
    series.params.n = bp.n;
    series.params.domain = DomainSpec<Scalar>::ball(Scalar(1), 2);
    series.params.weight = WeightSpec<Scalar>::zero();
    series.scheme_order = 8;  // samples are exact; only fd defects remain
    series.t_end_requested = times.back();
    Scalar prev = 0;
    for (const Scalar t : times) {
        if (!(t > Scalar(0)) || (!series.records.empty() && t <= prev))
            throw std::invalid_argument("barenblatt_series: times must be positive increasing");
        FrequencyRecord<Scalar> rec;
        rec.t = t;
        rec.I = barenblatt_I(bp, t, A);
        rec.N = barenblatt_N(bp, t);
        rec.D = *rec.N * rec.I;
        rec.N_G = rec.D / std::pow(rec.I, bp.p * bp.q / (bp.q + 1));
        series.records.push_back(rec);
        prev = t;
    }
    return series;
}

/// Max relative defect | L_h u^q - du/dt | / max |du/dt| of the sampled
/// profile under the discrete radial operator at time t, measured on cells
/// at least `margin` cells away from the free boundary (delta > 0) and from
/// the outer wall. Decays like h^2 on smooth regions.
template <class Scalar>
Scalar barenblatt_residual(const BarenblattParams<Scalar>& bp, Scalar t, Scalar r_outer,
                           Eigen::Index cells, Eigen::Index margin = 3) {
    auto domain = DomainSpec<Scalar>::ball(r_outer, cells);
    ProblemParams<Scalar> params{bp.p, bp.q, bp.n, domain, WeightSpec<Scalar>::zero()};
    const Grid<Scalar> grid = make_grid(params);
    ArrayX<Scalar> u(cells), dudt(cells);
    for (Eigen::Index i = 0; i < cells; ++i) {
        u[i] = barenblatt_eval(bp, t, grid.cell_centers[i]);
        dudt[i] = barenblatt_dudt(bp, t, grid.cell_centers[i]);
    }
    const OperatorConfig<Scalar> op{bp.p, Scalar(0)};
    const ArrayX<Scalar> Lv = apply_operator(signed_power(u, bp.q).eval(), grid, op);
    const Scalar scale = dudt.abs().maxCoeff();
    if (!(scale > Scalar(0))) throw std::runtime_error("barenblatt_residual: flat profile");

    const Scalar r_front = bp.delta > Scalar(0)
                               ? bp.xi0 * std::pow(t, Scalar(1) / bp.beta)
                               : std::numeric_limits<Scalar>::infinity();
    Scalar worst = 0;
    for (Eigen::Index i = 0; i < cells - margin; ++i) {
        const Scalar r = grid.cell_centers[i];
        if (std::abs(r - r_front) <= Scalar(margin) * grid.h) continue;
        worst = std::max(worst, std::abs(Lv[i] - dudt[i]) / scale);
    }
    return worst;
}

}  // namespace parafreq
