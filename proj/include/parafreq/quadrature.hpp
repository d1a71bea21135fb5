#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace parafreq {

namespace detail {
// 15-point Gauss-Legendre rule on [-1, 1], positive half (symmetric).
inline constexpr std::array<double, 8> kGaussNodes = {
    0.0,
    0.20119409399743452230,
    0.39415134707756336990,
    0.57097217260853884754,
    0.72441773136017004742,
    0.84820658341042721620,
    0.93727339240070590431,
    0.98799251802048542849,
};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.20257824192556127288,
    0.19843148532711157646,
    0.18616100001556221103,
    0.16626920581699393355,
    0.13957067792615431445,
    0.10715922046717193501,
    0.07036604748810812471,
    0.03075324199611726835,
};

template <class Scalar, class F>
Scalar gauss_panel(F&& f, Scalar a, Scalar b) {
    const Scalar c = (a + b) / Scalar(2);
    const Scalar r = (b - a) / Scalar(2);
    Scalar sum = Scalar(kGaussWeights[0]) * f(c);
    for (std::size_t j = 1; j < kGaussNodes.size(); ++j) {
        const Scalar dx = r * Scalar(kGaussNodes[j]);
        sum += Scalar(kGaussWeights[j]) * (f(c + dx) + f(c - dx));
    }
    return sum * r;
}
}  // namespace detail

/// Composite 15-point Gauss rule with panel doubling. The level result is
/// accepted once two successive levels agree to rel_tol (Richardson-style
/// error estimate from the difference); throws if the budget is exhausted.
template <class Scalar, class F>
Scalar integrate_adaptive(F&& f, Scalar a, Scalar b, Scalar rel_tol = Scalar(1e-10),
                          int max_doublings = 16) {
    if (!(b >= a)) throw std::invalid_argument("integrate_adaptive: needs b >= a");
    if (a == b) return Scalar(0);
    Scalar prev = detail::gauss_panel(f, a, b);
    for (int level = 1; level <= max_doublings; ++level) {
        const long panels = 1L << level;
        const Scalar w = (b - a) / Scalar(panels);
        Scalar sum = 0;
        for (long k = 0; k < panels; ++k)
            sum += detail::gauss_panel(f, a + Scalar(k) * w, a + Scalar(k + 1) * w);
        const Scalar err = std::abs(sum - prev);
        if (err <= rel_tol * std::max(std::abs(sum), Scalar(1e-300))) return sum;
        prev = sum;
    }
    throw std::runtime_error("integrate_adaptive: did not converge to requested tolerance");
}

/// Integral over [a, infinity): doubling segments [X, 2X] appended until the
/// latest segment is negligible against the running total. Handles both
/// exponential and (integrable) algebraic tails.
template <class Scalar, class F>
Scalar integrate_to_infinity(F&& f, Scalar a, Scalar rel_tol = Scalar(1e-10),
                             int max_segments = 60) {
    Scalar x0 = a;
    Scalar x1 = std::max(std::abs(a) * Scalar(2), Scalar(1));
    if (x1 <= x0) x1 = x0 + Scalar(1);
    Scalar total = integrate_adaptive(f, x0, x1, rel_tol);
    for (int s = 0; s < max_segments; ++s) {
        x0 = x1;
        x1 *= Scalar(2);
        const Scalar piece = integrate_adaptive(f, x0, x1, rel_tol);
        total += piece;
        if (std::abs(piece) <= rel_tol * Scalar(0.01) * std::max(std::abs(total), Scalar(1e-300)))
            return total;
    }
    throw std::runtime_error("integrate_to_infinity: tail did not decay");
}

}  // namespace parafreq
