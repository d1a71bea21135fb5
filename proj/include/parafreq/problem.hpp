#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "parafreq/power.hpp"

namespace parafreq {

/// Diffusion regime indicator delta = q(p-1) - 1.
///   delta > 0  slow diffusion (compact supports, finite propagation speed)
///   delta = 0  critical
///   delta < 0  fast diffusion (finite-time extinction)
template <class Scalar>
Scalar delta_of(Scalar p, Scalar q) {
    if (!(p > Scalar(1))) throw std::invalid_argument("delta_of: requires p > 1");
    if (!(q > Scalar(0))) throw std::invalid_argument("delta_of: requires q > 0");
    return q * (p - Scalar(1)) - Scalar(1);
}

/// Area of the unit sphere S^{n-1}: 2, 2*pi, 4*pi for n = 1, 2, 3.
/// Radial integrals use  integral_{R^n} f dx = sphere_area(n) * integral_0^inf f r^{n-1} dr.
template <class Scalar = double>
Scalar sphere_area(int n) {
    if (n < 1) throw std::invalid_argument("sphere_area: dimension must be >= 1");
    const Scalar half_n = Scalar(n) / Scalar(2);
    return Scalar(2) * std::pow(Scalar(EIGEN_PI), half_n) / Scalar(std::tgamma(double(half_n)));
}

enum class DomainKind {
    Interval,         // [left, right], Dirichlet at both faces
    RadialBall,       // [0, R], symmetry at the origin, Dirichlet at R
    RadialTruncated,  // whole space truncated at R_max; numerically a ball with
                      // R chosen so the exterior contribution to I is < 1e-10
};

template <class Scalar = double>
struct DomainSpec {
    DomainKind kind = DomainKind::Interval;
    Scalar left = 0;
    Scalar right = 1;
    Eigen::Index cells = 64;

    static DomainSpec interval(Scalar left, Scalar right, Eigen::Index cells) {
        DomainSpec d{DomainKind::Interval, left, right, cells};
        d.validate();
        return d;
    }
    static DomainSpec ball(Scalar radius, Eigen::Index cells) {
        DomainSpec d{DomainKind::RadialBall, Scalar(0), radius, cells};
        d.validate();
        return d;
    }
    static DomainSpec truncated(Scalar r_max, Eigen::Index cells) {
        DomainSpec d{DomainKind::RadialTruncated, Scalar(0), r_max, cells};
        d.validate();
        return d;
    }

    bool radial() const { return kind != DomainKind::Interval; }

    void validate() const {
        if (!(right > left)) throw std::invalid_argument("DomainSpec: needs right > left");
        if (radial() && left != Scalar(0))
            throw std::invalid_argument("DomainSpec: radial domains start at r = 0");
        if (cells < 2) throw std::invalid_argument("DomainSpec: needs at least 2 cells");
        if (!std::isfinite(double(left)) || !std::isfinite(double(right)))
            throw std::invalid_argument("DomainSpec: bounds must be finite");
    }
};

/// Weight phi in the measure e^{-phi} dV. Catalog: zero, quadratic a|x|^2,
/// tabulated per-cell/per-face samples, or an arbitrary callable.
template <class Scalar = double>
struct WeightSpec {
    enum class Kind { Zero, Quadratic, Custom, Tabulated };

    Kind kind = Kind::Zero;
    Scalar coeff = 0;                          // quadratic: phi(x) = coeff * |x|^2
    std::function<Scalar(Scalar)> fn;          // custom
    ArrayX<Scalar> cell_values, face_values;   // tabulated

    static WeightSpec zero() { return WeightSpec{}; }
    static WeightSpec quadratic(Scalar a) {
        WeightSpec w;
        w.kind = Kind::Quadratic;
        w.coeff = a;
        return w;
    }
    static WeightSpec custom(std::function<Scalar(Scalar)> f) {
        WeightSpec w;
        w.kind = Kind::Custom;
        w.fn = std::move(f);
        if (!w.fn) throw std::invalid_argument("WeightSpec: empty callable");
        return w;
    }
    static WeightSpec tabulated(ArrayX<Scalar> cells, ArrayX<Scalar> faces) {
        WeightSpec w;
        w.kind = Kind::Tabulated;
        w.cell_values = std::move(cells);
        w.face_values = std::move(faces);
        if (w.face_values.size() != w.cell_values.size() + 1)
            throw std::invalid_argument("WeightSpec: tabulated needs cells+1 face samples");
        return w;
    }

    bool closed_form() const { return kind != Kind::Tabulated; }

    Scalar phi(Scalar x) const {
        switch (kind) {
            case Kind::Zero: return Scalar(0);
            case Kind::Quadratic: return coeff * x * x;
            case Kind::Custom: return fn(x);
            case Kind::Tabulated:
                throw std::logic_error("WeightSpec: tabulated weight has no closed form");
        }
        return Scalar(0);
    }
};

/// Full problem description for  d_t u = L_{p,phi} u^q  on a weighted domain.
template <class Scalar = double>
struct ProblemParams {
    Scalar p = 2;
    Scalar q = 1;
    int n = 1;  // radial dimension; must be 1 for intervals
    DomainSpec<Scalar> domain;
    WeightSpec<Scalar> weight;

    Scalar delta() const { return delta_of(p, q); }

    void validate() const {
        (void)delta_of(p, q);
        domain.validate();
        if (n < 1) throw std::invalid_argument("ProblemParams: dimension must be >= 1");
        if (!domain.radial() && n != 1)
            throw std::invalid_argument("ProblemParams: interval domains require n = 1");
    }
};

}  // namespace parafreq
