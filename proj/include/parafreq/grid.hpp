#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "parafreq/problem.hpp"

namespace parafreq {

/// Uniform cell-centered grid carrying the weighted quadrature.
///
/// Cells i = 0..m-1 centered at x_i = left + (i + 1/2) h; faces f = 0..m at
/// x_f = left + f h. With the geometric density mu(x) = s(x) e^{-phi(x)}
/// (s = 1 on intervals, s = sphere_area(n) r^{n-1} radially):
///
///   cell_weights[i] = mu(x_i) h            midpoint rule for cell integrals
///   face_weights[f] = mu(x_f) h            interior faces
///                   = mu(x_f) h / 2        closed (Dirichlet / origin) faces
///   face_density[f] = mu(x_f)              divergence assembly
///
/// The half weights at the end faces are what make the discrete
/// integration-by-parts identity exact; see apply_operator.
template <class Scalar = double>
struct Grid {
    DomainKind kind = DomainKind::Interval;
    int dim = 1;
    Scalar left = 0, right = 1, h = 0;
    ArrayX<Scalar> cell_centers;   // m
    ArrayX<Scalar> faces;          // m+1
    ArrayX<Scalar> cell_weights;   // m
    ArrayX<Scalar> face_weights;   // m+1
    ArrayX<Scalar> face_density;   // m+1

    Eigen::Index cells() const { return cell_centers.size(); }
    bool radial() const { return kind != DomainKind::Interval; }
    /// True when the left end is the symmetry axis r = 0 (no flux) rather than
    /// a Dirichlet face.
    bool origin_at_left() const { return radial(); }
};

template <class Scalar>
Grid<Scalar> make_grid(const DomainSpec<Scalar>& domain, const WeightSpec<Scalar>& weight,
                       int n = 1) {
    domain.validate();
    if (n < 1) throw std::invalid_argument("make_grid: dimension must be >= 1");
    if (!domain.radial() && n != 1)
        throw std::invalid_argument("make_grid: interval domains require n = 1");

    const Eigen::Index m = domain.cells;
    Grid<Scalar> g;
    g.kind = domain.kind;
    g.dim = n;
    g.left = domain.left;
    g.right = domain.right;
    g.h = (domain.right - domain.left) / Scalar(m);
    g.faces = ArrayX<Scalar>::LinSpaced(m + 1, domain.left, domain.right);
    g.cell_centers = g.faces.head(m) + Scalar(0.5) * g.h;

    auto phi_at = [&](const ArrayX<Scalar>& x, bool at_faces) -> ArrayX<Scalar> {
        if (weight.kind == WeightSpec<Scalar>::Kind::Tabulated) {
            const ArrayX<Scalar>& tab = at_faces ? weight.face_values : weight.cell_values;
            if (tab.size() != x.size())
                throw std::invalid_argument("make_grid: tabulated weight size mismatch");
            return tab;
        }
        ArrayX<Scalar> out(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = weight.phi(x[i]);
        return out;
    };

    ArrayX<Scalar> area_cells = ArrayX<Scalar>::Ones(m);
    ArrayX<Scalar> area_faces = ArrayX<Scalar>::Ones(m + 1);
    if (domain.radial()) {
        const Scalar omega = sphere_area<Scalar>(n);
        area_cells = omega * abs_power(g.cell_centers, Scalar(n - 1));
        area_faces = omega * abs_power(g.faces, Scalar(n - 1));
        // r = 0 face: r^{n-1} vanishes for n > 1; for n = 1 the density stays
        // positive and the symmetry gradient (defined 0) carries the no-flux.
        if (n > 1) area_faces[0] = Scalar(0);
    }

    g.cell_weights = area_cells * (-phi_at(g.cell_centers, false)).exp() * g.h;
    g.face_density = area_faces * (-phi_at(g.faces, true)).exp();
    g.face_weights = g.face_density * g.h;
    g.face_weights[0] *= Scalar(0.5);
    g.face_weights[m] *= Scalar(0.5);
    return g;
}

template <class Scalar>
Grid<Scalar> make_grid(const ProblemParams<Scalar>& params) {
    return make_grid(params.domain, params.weight, params.n);
}

/// Weighted integral  sum_i f_i w_i ~= integral f e^{-phi} dV. Accepts any
/// Eigen array expression over cell values.
template <class Derived, class Scalar>
Scalar integrate(const Eigen::ArrayBase<Derived>& f, const Grid<Scalar>& grid) {
    if (f.size() != grid.cells()) throw std::invalid_argument("integrate: size mismatch");
    return (f.derived() * grid.cell_weights).sum();
}

/// Cell field snapshot. Values are validated finite once at the API boundary;
/// inner loops work on raw arrays.
template <class Scalar = double>
struct Field {
    ArrayX<Scalar> values;
    Scalar time = 0;

    Field() = default;
    Field(ArrayX<Scalar> v, Scalar t) : values(std::move(v)), time(t) {
        if (!values.allFinite()) throw std::invalid_argument("Field: non-finite entries");
    }
};

}  // namespace parafreq
