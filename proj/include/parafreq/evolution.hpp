#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "parafreq/frequency.hpp"
#include "parafreq/grid.hpp"
#include "parafreq/plaplacian.hpp"
#include "parafreq/power.hpp"
#include "parafreq/problem.hpp"

namespace parafreq {

enum class SchemeKind { ExplicitRK4, ExplicitEuler, ImplicitEuler };

template <class Scalar = double>
struct NewtonConfig {
    int max_iter = 40;
    Scalar abs_tol = Scalar(1e-12);
    Scalar rel_tol = Scalar(1e-10);
    Scalar damping_min = Scalar(1) / Scalar(64);
};

template <class Scalar = double>
struct SchemeConfig {
    SchemeKind kind = SchemeKind::ExplicitRK4;
    /// Fixed step when > 0; 0 selects the adaptive stable_dt estimate.
    Scalar dt = 0;
    Scalar cfl_safety = Scalar(0.5);
    Scalar dt_max = std::numeric_limits<Scalar>::infinity();
    NewtonConfig<Scalar> newton;
    /// Floors keeping the frozen-coefficient CFL estimate finite.
    Scalar u_floor = Scalar(1e-12);
    Scalar g_floor = Scalar(1e-12);
    /// Run stops once I(t) < extinction_floor * I(a).
    Scalar extinction_floor = Scalar(1e-12);

    int order() const { return kind == SchemeKind::ExplicitRK4 ? 4 : 1; }

    void validate() const {
        if (dt < Scalar(0)) throw std::invalid_argument("SchemeConfig: dt >= 0 required");
        if (!(cfl_safety > Scalar(0)) || cfl_safety > Scalar(1))
            throw std::invalid_argument("SchemeConfig: cfl_safety in (0, 1]");
        if (newton.max_iter < 1) throw std::invalid_argument("SchemeConfig: newton.max_iter >= 1");
    }
};

/// Multiplicative-in-u perturbation f(x,t) = c(t) u(x,t) with declared
/// envelope C(t) >= |c(t)|; the envelope is what the perturbed-flow
/// inequalities consume.
template <class Scalar = double>
struct PerturbationSpec {
    std::function<Scalar(Scalar)> c_of_t;
    std::function<Scalar(Scalar)> bound_of_t;

    void validate() const {
        if (!c_of_t || !bound_of_t)
            throw std::invalid_argument("PerturbationSpec: both c(t) and its bound are required");
    }
};

struct SolverFailure : std::runtime_error {
    double t, dt, residual;
    SolverFailure(const std::string& what, double t_, double dt_, double residual_)
        : std::runtime_error(what), t(t_), dt(dt_), residual(residual_) {}
};

template <class Scalar = double>
struct Trajectory {
    ProblemParams<Scalar> params;
    std::vector<Field<Scalar>> snapshots;
    /// Worst online defect of |f| <= C(t)(|u| + ...) over all steps, <= 0 when
    /// the declared envelope really dominates the realized perturbation.
    Scalar perturbation_margin = -std::numeric_limits<Scalar>::infinity();
};

template <class Scalar>
struct EvolveResult {
    Trajectory<Scalar> trajectory;
    FrequencySeries<Scalar> series;
};

/// Frozen-coefficient CFL estimate
///   dt = cfl * h^2 / max_f [ p q max(|u|, u_floor)^{q-1} max(|g|, g_floor)^{p-2} ]
/// with u taken over the face's neighbor cells (both neighbors tried, which
/// covers the q < 1 branch where small |u| maximizes the coefficient) and the
/// gradient of v = u^q. Capped at dt_max.
template <class Derived, class Scalar>
Scalar stable_dt(const Eigen::ArrayBase<Derived>& u, const ProblemParams<Scalar>& params,
                 const Grid<Scalar>& grid, const SchemeConfig<Scalar>& scheme) {
    const Scalar p = params.p, q = params.q;
    const Eigen::Index m = grid.cells();
    const ArrayX<Scalar> g = face_gradient(signed_power(u, q), grid);
    Scalar coef_max = 0;
    for (Eigen::Index f = 0; f <= m; ++f) {
        const Scalar gpow = abs_power(std::max(std::abs(g[f]), scheme.g_floor), p - Scalar(2));
        Scalar upow = 0;
        if (f > 0)
            upow = std::max(upow, abs_power(std::max(std::abs(u.derived()[f - 1]), scheme.u_floor),
                                            q - Scalar(1)));
        if (f < m)
            upow = std::max(upow, abs_power(std::max(std::abs(u.derived()[f]), scheme.u_floor),
                                            q - Scalar(1)));
        coef_max = std::max(coef_max, p * q * upow * gpow);
    }
    const Scalar dt = scheme.cfl_safety * grid.h * grid.h / std::max(coef_max, Scalar(1e-300));
    return std::min(dt, scheme.dt_max);
}

namespace detail {

template <class Scalar>
ArrayX<Scalar> flow_rhs(const ArrayX<Scalar>& u, Scalar t, const ProblemParams<Scalar>& params,
                        const Grid<Scalar>& grid, const OperatorConfig<Scalar>& op,
                        const std::optional<PerturbationSpec<Scalar>>& pert) {
    ArrayX<Scalar> r = apply_operator(signed_power(u, params.q), grid, op);
    if (pert) r += pert->c_of_t(t) * u;
    return r;
}

/// Tridiagonal solve (Thomas). Arrays are row bands; in-place on copies.
template <class Scalar>
ArrayX<Scalar> solve_tridiagonal(ArrayX<Scalar> lower, ArrayX<Scalar> diag, ArrayX<Scalar> upper,
                                 ArrayX<Scalar> rhs) {
    const Eigen::Index m = diag.size();
    for (Eigen::Index i = 1; i < m; ++i) {
        if (diag[i - 1] == Scalar(0))
            throw std::runtime_error("solve_tridiagonal: zero pivot");
        const Scalar w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (diag[m - 1] == Scalar(0)) throw std::runtime_error("solve_tridiagonal: zero pivot");
    ArrayX<Scalar> x(m);
    x[m - 1] = rhs[m - 1] / diag[m - 1];
    for (Eigen::Index i = m - 2; i >= 0; --i) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

/// Face conductances fd_f F'(g_f)/h of the operator linearization at v,
/// with the p < 2 derivative floored by eps_J.
template <class Scalar>
ArrayX<Scalar> face_conductance(const ArrayX<Scalar>& v, const Grid<Scalar>& grid, Scalar p,
                                Scalar eps_reg) {
    const ArrayX<Scalar> g = face_gradient(v, grid);
    Scalar eps_j = eps_reg;
    if (p < Scalar(2)) {
        const Scalar gscale = std::max(g.abs().maxCoeff(), Scalar(1));
        eps_j = std::max(eps_reg, Scalar(1e-8) * gscale);
    }
    ArrayX<Scalar> c(g.size());
    for (Eigen::Index f = 0; f < g.size(); ++f)
        c[f] = grid.face_density[f] * flux_derivative(g[f], p, eps_j) / grid.h;
    return c;
}

/// Bands of d(L_h v)/dv (tridiagonal, rows scaled by 1/w_i).
template <class Scalar>
void operator_jacobian(const ArrayX<Scalar>& v, const Grid<Scalar>& grid, Scalar p, Scalar eps_reg,
                       ArrayX<Scalar>& lower, ArrayX<Scalar>& diag, ArrayX<Scalar>& upper) {
    const Eigen::Index m = grid.cells();
    const ArrayX<Scalar> cf = face_conductance(v, grid, p, eps_reg);
    const Scalar left_mult = grid.origin_at_left() ? Scalar(0) : Scalar(2);
    lower = ArrayX<Scalar>::Zero(m);
    diag = ArrayX<Scalar>::Zero(m);
    upper = ArrayX<Scalar>::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Scalar wl = (i == 0) ? left_mult * cf[0] : cf[i];
        const Scalar wr = (i == m - 1) ? Scalar(2) * cf[m] : cf[i + 1];
        diag[i] = -(wl + wr) / grid.cell_weights[i];
        if (i > 0) lower[i] = cf[i] / grid.cell_weights[i];
        if (i < m - 1) upper[i] = cf[i + 1] / grid.cell_weights[i];
    }
}

template <class Scalar>
struct NewtonOutcome {
    bool converged = false;
    ArrayX<Scalar> u;
    Scalar residual = std::numeric_limits<Scalar>::infinity();
};

/// One backward-Euler stage u+ - dt (L (u+)^q + c u+) = u0. For q >= 1 the
/// unknown is u itself; for q < 1 the unknown is v = u^q so the Newton
/// diagonal (1/q)|v|^{1/q-1} degenerates instead of blowing up at zeros.
template <class Scalar>
NewtonOutcome<Scalar> newton_stage(const ArrayX<Scalar>& u0, Scalar t_new, Scalar dt,
                                   const ProblemParams<Scalar>& params, const Grid<Scalar>& grid,
                                   const OperatorConfig<Scalar>& op,
                                   const std::optional<PerturbationSpec<Scalar>>& pert,
                                   const NewtonConfig<Scalar>& cfg) {
    const Scalar p = params.p, q = params.q;
    const Scalar c = pert ? pert->c_of_t(t_new) : Scalar(0);
    const bool u_form = q >= Scalar(1);
    if (!u_form && !(Scalar(1) - dt * c > Scalar(0.5))) return {};  // force dt halving

    const Eigen::Index m = u0.size();
    const Scalar res_tol =
        cfg.abs_tol * std::max(Scalar(1), u0.abs().maxCoeff()) + cfg.rel_tol * u0.abs().maxCoeff();

    // Unknown x: u itself (u_form) or v = u^q.
    ArrayX<Scalar> x = u_form ? u0 : signed_power(u0, q).eval();

    auto residual_of = [&](const ArrayX<Scalar>& xs) -> ArrayX<Scalar> {
        if (u_form) {
            ArrayX<Scalar> v = signed_power(xs, q);
            return xs - dt * (apply_operator(v, grid, op) + c * xs) - u0;
        }
        ArrayX<Scalar> u = signed_power(xs, Scalar(1) / q);
        return (Scalar(1) - dt * c) * u - dt * apply_operator(xs, grid, op) - u0;
    };

    ArrayX<Scalar> R = residual_of(x);
    Scalar rnorm = R.abs().maxCoeff();
    ArrayX<Scalar> lower(m), diag(m), upper(m);
    for (int it = 0; it < cfg.max_iter; ++it) {
        if (rnorm <= res_tol) return {true, u_form ? x : signed_power(x, Scalar(1) / q).eval(),
                                      rnorm};
        // Jacobian bands.
        if (u_form) {
            ArrayX<Scalar> v = signed_power(x, q);
            operator_jacobian(v, grid, p, op.eps_reg, lower, diag, upper);
            ArrayX<Scalar> chain(m);
            for (Eigen::Index i = 0; i < m; ++i)
                chain[i] = q * abs_power(x[i], q - Scalar(1));
            for (Eigen::Index i = 0; i < m; ++i) {
                if (i > 0) lower[i] *= -dt * chain[i - 1];
                diag[i] = Scalar(1) - dt * (diag[i] * chain[i] + c);
                if (i < m - 1) upper[i] *= -dt * chain[i + 1];
            }
        } else {
            operator_jacobian(x, grid, p, op.eps_reg, lower, diag, upper);
            for (Eigen::Index i = 0; i < m; ++i) {
                const Scalar du_dv =
                    abs_power(x[i], Scalar(1) / q - Scalar(1)) / q;  // d u / d v >= 0
                if (i > 0) lower[i] *= -dt;
                diag[i] = (Scalar(1) - dt * c) * du_dv - dt * diag[i];
                if (i < m - 1) upper[i] *= -dt;
            }
        }
        ArrayX<Scalar> step;
        try {
            step = solve_tridiagonal<Scalar>(lower, diag, upper, (-R).eval());
        } catch (const std::runtime_error&) {
            return {};
        }
        // Damped acceptance on the max-norm residual.
        Scalar lambda = 1;
        bool accepted = false;
        while (lambda >= cfg.damping_min) {
            ArrayX<Scalar> x_try = x + lambda * step;
            ArrayX<Scalar> R_try = residual_of(x_try);
            const Scalar r_try = R_try.abs().maxCoeff();
            if (std::isfinite(double(r_try)) &&
                (r_try <= (Scalar(1) - lambda / Scalar(4)) * rnorm || r_try <= res_tol)) {
                x = std::move(x_try);
                R = std::move(R_try);
                rnorm = r_try;
                accepted = true;
                break;
            }
            lambda /= Scalar(2);
        }
        if (!accepted) return {false, {}, rnorm};
    }
    if (rnorm <= res_tol)
        return {true, u_form ? x : signed_power(x, Scalar(1) / q).eval(), rnorm};
    return {false, {}, rnorm};
}

}  // namespace detail

/// One explicit step (forward Euler or classical RK4 by scheme.kind).
template <class Scalar>
ArrayX<Scalar> step_explicit(const ArrayX<Scalar>& u, Scalar t, Scalar dt,
                             const ProblemParams<Scalar>& params, const Grid<Scalar>& grid,
                             const OperatorConfig<Scalar>& op, const SchemeConfig<Scalar>& scheme,
                             const std::optional<PerturbationSpec<Scalar>>& pert = {}) {
    ArrayX<Scalar> out;
    if (scheme.kind == SchemeKind::ExplicitEuler) {
        out = u + dt * detail::flow_rhs(u, t, params, grid, op, pert);
    } else {
        const ArrayX<Scalar> k1 = detail::flow_rhs(u, t, params, grid, op, pert);
        const ArrayX<Scalar> k2 = detail::flow_rhs<Scalar>(u + Scalar(0.5) * dt * k1,
                                                           t + Scalar(0.5) * dt, params, grid, op,
                                                           pert);
        const ArrayX<Scalar> k3 = detail::flow_rhs<Scalar>(u + Scalar(0.5) * dt * k2,
                                                           t + Scalar(0.5) * dt, params, grid, op,
                                                           pert);
        const ArrayX<Scalar> k4 = detail::flow_rhs<Scalar>(u + dt * k3, t + dt, params, grid, op,
                                                           pert);
        out = u + dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
    }
    if (!out.allFinite())
        throw SolverFailure("explicit step produced non-finite values at t = " + std::to_string(double(t)),
                            double(t), double(dt), std::numeric_limits<double>::quiet_NaN());
    return out;
}

/// One backward-Euler step via damped Newton; on failure the step is bisected
/// (at most 10 times) before giving up.
template <class Scalar>
ArrayX<Scalar> step_implicit(const ArrayX<Scalar>& u, Scalar t, Scalar dt,
                             const ProblemParams<Scalar>& params, const Grid<Scalar>& grid,
                             const OperatorConfig<Scalar>& op, const SchemeConfig<Scalar>& scheme,
                             const std::optional<PerturbationSpec<Scalar>>& pert = {},
                             int depth = 0) {
    auto outcome = detail::newton_stage(u, t + dt, dt, params, grid, op, pert, scheme.newton);
    if (outcome.converged) return std::move(outcome.u);
    if (depth >= 10)
        throw SolverFailure("implicit step: Newton failed after 10 dt halvings at t = " +
                                std::to_string(double(t)) + " (last residual " +
                                std::to_string(double(outcome.residual)) + ")",
                            double(t), double(dt), double(outcome.residual));
    const Scalar half = dt / Scalar(2);
    ArrayX<Scalar> mid = step_implicit(u, t, half, params, grid, op, scheme, pert, depth + 1);
    return step_implicit<Scalar>(mid, t + half, half, params, grid, op, scheme, pert, depth + 1);
}

/// March u0 over [a, b], recording the frequency quadruple at every accepted
/// step and a field snapshot every `record_every` steps. Stops early (with the
/// extinction time flagged) when I falls below extinction_floor * I(a).
template <class Scalar>
EvolveResult<Scalar> evolve(const Field<Scalar>& u0, std::pair<Scalar, Scalar> t_span,
                            const ProblemParams<Scalar>& params, const Grid<Scalar>& grid,
                            const SchemeConfig<Scalar>& scheme,
                            const std::optional<PerturbationSpec<Scalar>>& pert = {},
                            int record_every = 1) {
    params.validate();
    scheme.validate();
    if (pert) pert->validate();
    if (u0.values.size() != grid.cells())
        throw std::invalid_argument("evolve: initial data does not match grid");
    if (!(t_span.second >= t_span.first))
        throw std::invalid_argument("evolve: needs t_end >= t_start");
    if (record_every < 1) throw std::invalid_argument("evolve: record_every >= 1");

    const OperatorConfig<Scalar> op{params.p, Scalar(0)};
    const Scalar q = params.q, p = params.p;

    EvolveResult<Scalar> out;
    out.trajectory.params = params;
    out.series.params = params;
    out.series.scheme_order = scheme.order();
    out.series.t_end_requested = t_span.second;

    ArrayX<Scalar> u = u0.values;
    Scalar t = t_span.first;
    out.trajectory.snapshots.emplace_back(u, t);
    out.series.records.push_back(frequency(u, grid, p, q, t));
    const Scalar I0 = out.series.records.front().I;

    const Scalar t_end = t_span.second;
    const Scalar t_eps = std::max(Scalar(1e-14), Scalar(1e-12) * std::abs(t_end));
    long step_count = 0;
    while (t < t_end - t_eps) {
        Scalar dt = scheme.dt > Scalar(0) ? scheme.dt : stable_dt(u, params, grid, scheme);
        dt = std::min(dt, t_end - t);
        if (!(dt > Scalar(0)))
            throw SolverFailure("evolve: step size underflow at t = " + std::to_string(double(t)),
                                double(t), double(dt), 0.0);

        if (scheme.kind == SchemeKind::ImplicitEuler)
            u = step_implicit(u, t, dt, params, grid, op, scheme, pert);
        else
            u = step_explicit(u, t, dt, params, grid, op, scheme, pert);
        t += dt;
        ++step_count;

        if (pert) {
            // Online certificate that the realized perturbation f = c(t) u sits
            // under the declared envelope, in the form the inequalities use.
            const Scalar c = pert->c_of_t(t);
            const Scalar C = pert->bound_of_t(t);
            const ArrayX<Scalar> g = face_gradient(signed_power(u, q), grid).abs();
            Scalar margin = -std::numeric_limits<Scalar>::infinity();
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                const Scalar gmax = std::max(g[i], g[i + 1]);
                const Scalar env =
                    q >= Scalar(1)
                        ? C * (std::abs(u[i]) + abs_power(gmax, p / (q + Scalar(1))))
                        : C * (std::abs(u[i]) + std::sqrt(std::abs(u[i])) *
                                                    abs_power(gmax, p / (Scalar(2) * q + Scalar(2))));
                margin = std::max(margin, std::abs(c * u[i]) - env);
            }
            out.trajectory.perturbation_margin =
                std::max(out.trajectory.perturbation_margin, margin);
            if (margin > Scalar(1e-12) * (Scalar(1) + u.abs().maxCoeff()))
                throw std::invalid_argument(
                    "evolve: realized perturbation exceeds its declared envelope");
        }

        const auto rec = frequency(u, grid, p, q, t);
        out.series.records.push_back(rec);
        if (step_count % record_every == 0) out.trajectory.snapshots.emplace_back(u, t);

        if (I0 > Scalar(0) && rec.I < scheme.extinction_floor * I0) {
            out.series.extinction_time = t;
            break;
        }
    }
    if (out.trajectory.snapshots.back().time != t) out.trajectory.snapshots.emplace_back(u, t);
    return out;
}

template <class Scalar>
EvolveResult<Scalar> evolve(const Field<Scalar>& u0, std::pair<Scalar, Scalar> t_span,
                            const ProblemParams<Scalar>& params, const Grid<Scalar>& grid,
                            const SchemeConfig<Scalar>& scheme, const PerturbationSpec<Scalar>& pert,
                            int record_every = 1) {
    return evolve(u0, t_span, params, grid, scheme,
                  std::optional<PerturbationSpec<Scalar>>(pert), record_every);
}

}  // namespace parafreq
