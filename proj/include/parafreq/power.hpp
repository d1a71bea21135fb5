#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace parafreq {

template <class Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

/// Odd power |x|^{s-1} x. This is the branch used everywhere a power of the
/// unknown appears, so sign-changing fields are first-class: u^q, the flux
/// |g|^{p-2} g and the Newton chain rule all route through here.
template <class Scalar>
Scalar signed_power(Scalar x, Scalar s) {
    if (!(s > Scalar(0))) throw std::invalid_argument("signed_power: exponent must be positive");
    if (s == Scalar(1)) return x;
    if (x == Scalar(0)) return Scalar(0);
    return std::copysign(std::pow(std::abs(x), s), x);
}

/// Even companion |x|^s (s >= 0); |x|^0 == 1 including x == 0.
template <class Scalar>
Scalar abs_power(Scalar x, Scalar s) {
    if (s < Scalar(0)) throw std::invalid_argument("abs_power: exponent must be nonnegative");
    if (s == Scalar(0)) return Scalar(1);
    if (s == Scalar(1)) return std::abs(x);
    return std::pow(std::abs(x), s);
}

template <class Derived>
ArrayX<typename Derived::Scalar> signed_power(const Eigen::ArrayBase<Derived>& x,
                                              typename Derived::Scalar s) {
    using Scalar = typename Derived::Scalar;
    if (!(s > Scalar(0))) throw std::invalid_argument("signed_power: exponent must be positive");
    if (s == Scalar(1)) return x.derived();
    return x.derived().unaryExpr([s](Scalar v) { return signed_power(v, s); });
}

template <class Derived>
ArrayX<typename Derived::Scalar> abs_power(const Eigen::ArrayBase<Derived>& x,
                                           typename Derived::Scalar s) {
    using Scalar = typename Derived::Scalar;
    return x.derived().unaryExpr([s](Scalar v) { return abs_power(v, s); });
}

}  // namespace parafreq
