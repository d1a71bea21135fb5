#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "parafreq/grid.hpp"
#include "parafreq/power.hpp"

namespace parafreq {

template <class Scalar = double>
struct OperatorConfig {
    Scalar p = 2;
    /// Flux regularization (g^2 + eps^2)^{(p-2)/2} g. The default 0 is valid
    /// for every p > 1: the unregularized flux signed_power(g, p-1) is
    /// continuous at g = 0, only its derivative degenerates; Newton floors the
    /// derivative separately.
    Scalar eps_reg = 0;

    void validate() const {
        if (!(p > Scalar(1))) throw std::invalid_argument("OperatorConfig: requires p > 1");
        if (eps_reg < Scalar(0)) throw std::invalid_argument("OperatorConfig: eps_reg >= 0");
    }
};

/// Gradient values on all m+1 faces. Interior faces take the centered
/// difference of the neighboring cells. Closed ends carry the boundary mode:
/// Dirichlet faces hold the one-sided difference against the zero face value
/// (distance h/2), the radial origin face holds 0 by symmetry.
template <class Scalar>
struct FaceField {
    ArrayX<Scalar> values;  // m+1
};

template <class Derived, class Scalar>
ArrayX<Scalar> face_gradient(const Eigen::ArrayBase<Derived>& v, const Grid<Scalar>& grid) {
    const Eigen::Index m = grid.cells();
    if (v.size() != m) throw std::invalid_argument("face_gradient: size mismatch");
    ArrayX<Scalar> g(m + 1);
    g.segment(1, m - 1) = (v.derived().tail(m - 1) - v.derived().head(m - 1)) / grid.h;
    g[0] = grid.origin_at_left() ? Scalar(0) : Scalar(2) * v.derived()[0] / grid.h;
    g[m] = Scalar(-2) * v.derived()[m - 1] / grid.h;
    return g;
}

template <class Scalar>
Scalar flux_scalar(Scalar g, Scalar p, Scalar eps_reg) {
    if (eps_reg == Scalar(0)) return signed_power(g, p - Scalar(1));
    return std::pow(g * g + eps_reg * eps_reg, (p - Scalar(2)) / Scalar(2)) * g;
}

/// d flux / d g = (g^2+eps^2)^{(p-4)/2} ((p-1) g^2 + eps^2), positive for
/// every p > 1 and eps > 0. Used only inside Newton Jacobians; callers must
/// supply eps_reg > 0 when p < 2 (the unregularized derivative blows up at 0).
template <class Scalar>
Scalar flux_derivative(Scalar g, Scalar p, Scalar eps_reg) {
    const Scalar s = g * g + eps_reg * eps_reg;
    if (s == Scalar(0)) {
        if (p > Scalar(2)) return Scalar(0);
        if (p == Scalar(2)) return Scalar(1);
        return std::numeric_limits<Scalar>::infinity();
    }
    return std::pow(s, (p - Scalar(4)) / Scalar(2)) * ((p - Scalar(1)) * g * g + eps_reg * eps_reg);
}

template <class Derived, class Scalar>
ArrayX<Scalar> flux(const Eigen::ArrayBase<Derived>& g, const OperatorConfig<Scalar>& cfg) {
    cfg.validate();
    if (cfg.eps_reg == Scalar(0)) return signed_power(g, cfg.p - Scalar(1));
    const Scalar e2 = cfg.eps_reg * cfg.eps_reg;
    return (g.derived().square() + e2).pow((cfg.p - Scalar(2)) / Scalar(2)) * g.derived();
}

/// Weighted p-Laplacian  (L_h v)_i = (mu_{f+} F_{f+} - mu_{f-} F_{f-}) / w_i
/// with F = flux(face_gradient(v)). By construction the summation-by-parts
/// identity holds exactly for arbitrary cell fields a, b:
///
///   sum_i a_i (L_h b)_i w_i = - sum_f grad(a)_f flux(grad(b)_f) face_weights_f
///
/// independent of p, phi, dimension and regularization.
template <class Derived, class Scalar>
ArrayX<Scalar> apply_operator(const Eigen::ArrayBase<Derived>& v, const Grid<Scalar>& grid,
                              const OperatorConfig<Scalar>& cfg) {
    const Eigen::Index m = grid.cells();
    const ArrayX<Scalar> F = flux(face_gradient(v, grid), cfg);
    return (grid.face_density.tail(m) * F.tail(m) - grid.face_density.head(m) * F.head(m)) /
           grid.cell_weights;
}

/// Face-quadrature gradient energy  sum_f |grad(v)_f|^p face_weights_f.
/// Shares the operator's face weights so that dI/dt = (q+1) D is an exact
/// semi-discrete identity (eps_reg = 0).
template <class Derived, class Scalar>
Scalar gradient_energy(const Eigen::ArrayBase<Derived>& v, const Grid<Scalar>& grid, Scalar p) {
    ArrayX<Scalar> g = face_gradient(v, grid);
    return (abs_power(g, p) * grid.face_weights).sum();
}

}  // namespace parafreq
