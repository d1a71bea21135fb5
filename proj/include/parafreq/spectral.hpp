#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "parafreq/frequency.hpp"
#include "parafreq/problem.hpp"

namespace parafreq {

/// Ancient solution of the Dirichlet heat flow u_t = u_xx on (0, L), built
/// from sine eigenmodes and defined for t <= 0:
///   u(t, x) = sum_k a_k e^{-lambda_k t} phi_k(x),
///   phi_k = sqrt(2/L) sin(k pi x / L),  lambda_k = (k pi / L)^2.
/// Every nonzero combination has I(t) growing exponentially as t -> -inf;
/// polynomial growth forces the zero solution. growth_classify below decides
/// which side a sampled series falls on.
template <class Scalar = double>
struct SpectralMode {
    int k = 1;
    Scalar amplitude = 0;
};

template <class Scalar = double>
struct SpectralSolution {
    Scalar length = Scalar(EIGEN_PI);
    std::vector<SpectralMode<Scalar>> modes;

    Scalar lambda(int k) const {
        const Scalar w = Scalar(k) * Scalar(EIGEN_PI) / length;
        return w * w;
    }

    void validate() const {
        if (!(length > Scalar(0))) throw std::invalid_argument("SpectralSolution: length > 0");
        for (std::size_t i = 0; i < modes.size(); ++i) {
            if (modes[i].k < 1) throw std::invalid_argument("SpectralSolution: mode index >= 1");
            if (!std::isfinite(double(modes[i].amplitude)))
                throw std::invalid_argument("SpectralSolution: non-finite amplitude");
            for (std::size_t j = 0; j < i; ++j)
                if (modes[j].k == modes[i].k)
                    throw std::invalid_argument("SpectralSolution: duplicate mode index");
        }
    }
};

template <class Scalar>
Scalar spectral_eval(const SpectralSolution<Scalar>& sol, Scalar t, Scalar x) {
    if (t > Scalar(0)) throw std::invalid_argument("spectral_eval: ancient solutions need t <= 0");
    const Scalar norm = std::sqrt(Scalar(2) / sol.length);
    Scalar u = 0;
    for (const auto& m : sol.modes)
        u += m.amplitude * std::exp(-sol.lambda(m.k) * t) * norm *
             std::sin(Scalar(m.k) * Scalar(EIGEN_PI) * x / sol.length);
    return u;
}

/// I(t) = sum a_k^2 e^{-2 lambda_k t}; the phi_k are orthonormal in L^2(0, L).
template <class Scalar>
Scalar spectral_I(const SpectralSolution<Scalar>& sol, Scalar t) {
    if (t > Scalar(0)) throw std::invalid_argument("spectral_I: ancient solutions need t <= 0");
    Scalar I = 0;
    for (const auto& m : sol.modes)
        I += m.amplitude * m.amplitude * std::exp(Scalar(-2) * sol.lambda(m.k) * t);
    return I;
}

/// D(t) = -sum a_k^2 lambda_k e^{-2 lambda_k t}.
template <class Scalar>
Scalar spectral_D(const SpectralSolution<Scalar>& sol, Scalar t) {
    if (t > Scalar(0)) throw std::invalid_argument("spectral_D: ancient solutions need t <= 0");
    Scalar D = 0;
    for (const auto& m : sol.modes)
        D -= m.amplitude * m.amplitude * sol.lambda(m.k) *
             std::exp(Scalar(-2) * sol.lambda(m.k) * t);
    return D;
}

template <class Scalar>
Scalar spectral_N(const SpectralSolution<Scalar>& sol, Scalar t) {
    const Scalar I = spectral_I(sol, t);
    if (!(I > Scalar(0))) throw std::domain_error("spectral_N: undefined for the zero solution");
    return spectral_D(sol, t) / I;
}

/// Exact frequency series at the given times (increasing, all <= 0).
template <class Scalar>
FrequencySeries<Scalar> spectral_series(const SpectralSolution<Scalar>& sol,
                                        const std::vector<Scalar>& times) {
    sol.validate();
    if (times.size() < 2) throw std::invalid_argument("spectral_series: need at least 2 times");
    FrequencySeries<Scalar> series;
    series.params.p = 2;
    series.params.q = 1;
    series.params.n = 1;
    series.params.domain = DomainSpec<Scalar>::interval(Scalar(0), sol.length, 2);
    series.params.weight = WeightSpec<Scalar>::zero();
    series.scheme_order = 8;  // samples are exact
    series.t_end_requested = times.back();
    Scalar prev = -std::numeric_limits<Scalar>::infinity();
    for (const Scalar t : times) {
        if (t > Scalar(0) || t <= prev)
            throw std::invalid_argument("spectral_series: times must be increasing and <= 0");
        FrequencyRecord<Scalar> rec;
        rec.t = t;
        rec.I = spectral_I(sol, t);
        rec.D = spectral_D(sol, t);
        if (rec.I > Scalar(0)) {
            rec.N = rec.D / rec.I;
            rec.N_G = rec.N;  // p = 2, q = 1: exponents coincide
        }
        series.records.push_back(rec);
        prev = t;
    }
    return series;
}

enum class GrowthKind { Exponential, Polynomial };

template <class Scalar = double>
struct GrowthClassification {
    GrowthKind kind = GrowthKind::Polynomial;
    /// Fitted slope of log I against |t| (exponential) or log(1 + |t|)
    /// (polynomial) over the final decade of the horizon.
    Scalar rate = 0;
    Scalar rss_exponential = 0;
    Scalar rss_polynomial = 0;
};

namespace detail {

template <class Scalar>
void ols_fit(const std::vector<Scalar>& z, const std::vector<Scalar>& y, Scalar& slope,
             Scalar& rss) {
    const Scalar nn = Scalar(z.size());
    Scalar zm = 0, ym = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        zm += z[i];
        ym += y[i];
    }
    zm /= nn;
    ym /= nn;
    Scalar szz = 0, szy = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        szz += (z[i] - zm) * (z[i] - zm);
        szy += (z[i] - zm) * (y[i] - ym);
    }
    if (!(szz > Scalar(0))) throw std::invalid_argument("ols_fit: degenerate abscissae");
    slope = szy / szz;
    rss = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const Scalar r = y[i] - ym - slope * (z[i] - zm);
        rss += r * r;
    }
}

}  // namespace detail

/// Decide whether I(t) grows exponentially or polynomially toward t -> -inf,
/// by competing least-squares fits of log I against |t| and against
/// log(1 + |t|) over the final decade |t| in [T/10, T]. Exponential wins when
/// its residual is at least 10x smaller. The identically-zero series
/// classifies as polynomial of rate 0 (the Liouville side).
template <class Scalar>
GrowthClassification<Scalar> growth_classify(const FrequencySeries<Scalar>& series) {
    if (series.records.size() < 2)
        throw std::invalid_argument("growth_classify: need at least 2 records");
    Scalar I_max = 0, t_min = 0;
    for (const auto& rec : series.records) {
        if (rec.t > Scalar(1e-12))
            throw std::invalid_argument("growth_classify: series is not ancient (has t > 0)");
        I_max = std::max(I_max, rec.I);
        t_min = std::min(t_min, rec.t);
    }
    GrowthClassification<Scalar> out;
    if (!(I_max > Scalar(0))) return out;  // zero solution: polynomial, rate 0

    const Scalar T = -t_min;
    if (!(T > Scalar(0))) throw std::invalid_argument("growth_classify: horizon has zero span");
    std::vector<Scalar> abs_t, log_I;
    for (const auto& rec : series.records) {
        const Scalar a = -rec.t;
        if (a < T / Scalar(10)) continue;
        if (!(rec.I > Scalar(0))) continue;
        abs_t.push_back(a);
        log_I.push_back(std::log(rec.I));
    }
    if (abs_t.size() < 5)
        throw std::invalid_argument(
            "growth_classify: fewer than 5 usable samples in the final decade; extend the "
            "horizon or sample more densely");

    std::vector<Scalar> log_shift(abs_t.size());
    for (std::size_t i = 0; i < abs_t.size(); ++i) log_shift[i] = std::log1p(abs_t[i]);

    Scalar slope_e = 0, slope_p = 0;
    detail::ols_fit(abs_t, log_I, slope_e, out.rss_exponential);
    detail::ols_fit(log_shift, log_I, slope_p, out.rss_polynomial);
    if (out.rss_exponential * Scalar(10) <= out.rss_polynomial) {
        out.kind = GrowthKind::Exponential;
        out.rate = slope_e;
    } else {
        out.kind = GrowthKind::Polynomial;
        out.rate = slope_p;
    }
    return out;
}

/// Horizon giving ~`efolds` e-foldings of the slowest nonzero mode; spectral
/// drivers extend to at least this span before classifying.
template <class Scalar>
Scalar recommended_horizon(const SpectralSolution<Scalar>& sol, Scalar efolds = Scalar(10)) {
    Scalar lambda_min = std::numeric_limits<Scalar>::infinity();
    for (const auto& m : sol.modes)
        if (m.amplitude != Scalar(0)) lambda_min = std::min(lambda_min, sol.lambda(m.k));
    if (!std::isfinite(double(lambda_min))) return Scalar(1);  // zero solution: any span
    return efolds / (Scalar(2) * lambda_min);
}

}  // namespace parafreq
