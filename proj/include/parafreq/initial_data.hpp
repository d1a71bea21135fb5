#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "parafreq/barenblatt.hpp"
#include "parafreq/grid.hpp"
#include "parafreq/power.hpp"

namespace parafreq {

/// a sin(k pi (x - left)/L) sampled at cell centers; exact discrete Dirichlet
/// eigenvector of the unweighted interval Laplacian.
template <class Scalar>
ArrayX<Scalar> eigenmode_data(const Grid<Scalar>& grid, int k, Scalar amplitude = Scalar(1)) {
    if (grid.radial()) throw std::invalid_argument("eigenmode_data: interval grids only");
    if (k < 1) throw std::invalid_argument("eigenmode_data: k >= 1");
    const Scalar L = grid.right - grid.left;
    ArrayX<Scalar> u(grid.cells());
    for (Eigen::Index i = 0; i < u.size(); ++i)
        u[i] = amplitude *
               std::sin(Scalar(k) * Scalar(EIGEN_PI) * (grid.cell_centers[i] - grid.left) / L);
    return u;
}

/// Compactly supported C-infinity bump a exp(1 - 1/(1 - s^2)), s = (x - c)/w,
/// zero outside |s| < 1.
template <class Scalar>
ArrayX<Scalar> bump_data(const Grid<Scalar>& grid, Scalar center, Scalar width,
                         Scalar amplitude = Scalar(1)) {
    if (!(width > Scalar(0))) throw std::invalid_argument("bump_data: width > 0");
    ArrayX<Scalar> u = ArrayX<Scalar>::Zero(grid.cells());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const Scalar s = (grid.cell_centers[i] - center) / width;
        if (std::abs(s) < Scalar(1)) u[i] = amplitude * std::exp(1 - 1 / (1 - s * s));
    }
    return u;
}

namespace detail {

/// 53-bit uniform in (0, 1); keeps the stream pinned to the mt19937_64 spec
/// rather than any library distribution.
inline double uniform01(std::mt19937_64& rng) {
    const double u = double(rng() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
}

inline double gaussian(std::mt19937_64& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * EIGEN_PI * u2);
}

}  // namespace detail

/// Smoothed Gaussian noise, tapered to honor the boundary conditions
/// (sin(pi (x-l)/L) on intervals, cos(pi r/(2R)) on balls), optionally
/// projected to zero weighted mean so the sample changes sign, then scaled to
/// max |u| = amplitude. Fully determined by (grid, seed, smooth_passes).
template <class Scalar>
ArrayX<Scalar> random_sign_changing(const Grid<Scalar>& grid, std::uint64_t seed,
                                    int smooth_passes = 8, Scalar amplitude = Scalar(1),
                                    bool zero_mean = true) {
    if (smooth_passes < 0) throw std::invalid_argument("random_sign_changing: passes >= 0");
    const Eigen::Index m = grid.cells();
    std::mt19937_64 rng(seed);
    ArrayX<Scalar> u(m);
    for (Eigen::Index i = 0; i < m; ++i) u[i] = Scalar(detail::gaussian(rng));

    ArrayX<Scalar> tmp(m);
    for (int pass = 0; pass < smooth_passes; ++pass) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const Scalar ul = i > 0 ? u[i - 1] : u[i];
            const Scalar ur = i + 1 < m ? u[i + 1] : u[i];
            tmp[i] = (ul + 2 * u[i] + ur) / 4;
        }
        u.swap(tmp);
    }

    ArrayX<Scalar> taper(m);
    const Scalar L = grid.right - grid.left;
    for (Eigen::Index i = 0; i < m; ++i) {
        const Scalar x = grid.cell_centers[i];
        taper[i] = grid.origin_at_left()
                       ? std::cos(Scalar(EIGEN_PI) * x / (2 * grid.right))
                       : std::sin(Scalar(EIGEN_PI) * (x - grid.left) / L);
    }
    u *= taper;

    if (zero_mean) {
        // Subtract a multiple of the taper itself so the boundary behavior
        // survives the projection.
        const Scalar num = (u * grid.cell_weights).sum();
        const Scalar den = (taper * grid.cell_weights).sum();
        if (den != Scalar(0)) u -= (num / den) * taper;
    }

    const Scalar peak = u.abs().maxCoeff();
    if (!(peak > Scalar(0)))
        throw std::runtime_error("random_sign_changing: degenerate draw");
    return (u * (amplitude / peak)).eval();
}

/// Self-similar profile sampled at cell centers at time t0 (> 0).
template <class Scalar>
ArrayX<Scalar> barenblatt_data(const Grid<Scalar>& grid, const BarenblattParams<Scalar>& bp,
                               Scalar t0) {
    if (!grid.radial() && bp.n != 1)
        throw std::invalid_argument("barenblatt_data: n > 1 needs a radial grid");
    ArrayX<Scalar> u(grid.cells());
    for (Eigen::Index i = 0; i < u.size(); ++i)
        u[i] = barenblatt_eval(bp, t0, std::abs(grid.cell_centers[i]));
    return u;
}

}  // namespace parafreq
