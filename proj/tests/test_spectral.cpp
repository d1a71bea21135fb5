#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "parafreq/evolution.hpp"
#include "parafreq/initial_data.hpp"
#include "parafreq/spectral.hpp"

using namespace parafreq;

namespace {

std::vector<double> linspace(double a, double b, int count) {
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) t[i] = a + (b - a) * double(i) / double(count - 1);
    return t;
}

SpectralSolution<double> two_mode() {
    SpectralSolution<double> sol;
    sol.modes = {{1, 1.0}, {2, 1.0}};
    return sol;
}

}  // namespace

TEST_CASE("closed-form energies of the two-mode solution") {
    auto sol = two_mode();
    const double e2 = std::exp(2.0), e8 = std::exp(8.0);
    CHECK(spectral_I(sol, -1.0) == doctest::Approx(e2 + e8).epsilon(1e-13));
    CHECK(spectral_D(sol, -1.0) == doctest::Approx(-(e2 + 4 * e8)).epsilon(1e-13));
    CHECK(spectral_N(sol, -1.0) ==
          doctest::Approx(-(e2 + 4 * e8) / (e2 + e8)).epsilon(1e-10));
    CHECK(spectral_N(sol, 0.0) == doctest::Approx(-2.5).epsilon(1e-13));
    CHECK(spectral_I(sol, 0.0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("mode normalization in pointwise evaluation") {
    SpectralSolution<double> sol;
    sol.modes = {{1, 3.0}};
    const double x = 1.1, t = -0.4;
    const double expect = 3.0 * std::sqrt(2.0 / EIGEN_PI) * std::exp(0.4) * std::sin(x);
    CHECK(spectral_eval(sol, t, x) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("single-mode frequency is pinned at -lambda_1") {
    SpectralSolution<double> sol;
    sol.modes = {{1, 0.7}};
    for (double t : {-3.0, -1.0, -0.25, 0.0})
        CHECK(spectral_N(sol, t) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("frequency stays in the spectral hull and increases toward the present") {
    SpectralSolution<double> sol;
    sol.modes = {{1, 0.5}, {3, 1.5}, {5, 0.25}};
    auto s = spectral_series(sol, linspace(-2.0, 0.0, 401));
    double prev = -std::numeric_limits<double>::infinity();
    for (auto& rec : s.records) {
        REQUIRE(rec.N.has_value());
        CHECK(*rec.N >= -25.0 - 1e-10);  // lambda_5 = 25
        CHECK(*rec.N <= -1.0 + 1e-10);
        CHECK(*rec.N >= prev - 1e-10);
        prev = *rec.N;
    }
    CHECK(check_convexity(s).passed);  // log I convex along the heat flow
    for (auto& v : check_monotonicity(s)) CHECK(v.passed);
}

TEST_CASE("ancient-only guards") {
    auto sol = two_mode();
    CHECK_THROWS_AS(spectral_I(sol, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(spectral_eval(sol, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(spectral_series(sol, linspace(-1.0, 0.5, 11)), std::invalid_argument);
    CHECK_THROWS_AS(spectral_series(sol, {-1.0}), std::invalid_argument);
    std::vector<double> unsorted{-1.0, -2.0, 0.0};
    CHECK_THROWS_AS(spectral_series(sol, unsorted), std::invalid_argument);
}

TEST_CASE("solution validation") {
    SpectralSolution<double> sol;
    sol.modes = {{1, 1.0}, {1, 2.0}};
    CHECK_THROWS_AS(sol.validate(), std::invalid_argument);
    sol.modes = {{0, 1.0}};
    CHECK_THROWS_AS(sol.validate(), std::invalid_argument);
    sol.modes = {{1, 1.0}};
    sol.length = 0.0;
    CHECK_THROWS_AS(sol.validate(), std::invalid_argument);
}

TEST_CASE("growth classification: random nontrivial sets are exponential") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> amp(0.1, 2.0);
    std::uniform_int_distribution<int> kdist(1, 6);
    for (int trial = 0; trial < 10; ++trial) {
        SpectralSolution<double> sol;
        const int count = 1 + int(rng() % 3);
        for (int j = 0; j < count; ++j) {
            const int k = kdist(rng);
            bool dup = false;
            for (auto& m : sol.modes) dup = dup || (m.k == k);
            if (!dup) sol.modes.push_back({k, amp(rng)});
        }
        const double T = recommended_horizon(sol);
        auto s = spectral_series(sol, linspace(-T, 0.0, 301));
        auto cls = growth_classify(s);
        CHECK(cls.kind == GrowthKind::Exponential);
        CHECK(cls.rate > 0.0);
        CHECK(cls.rss_exponential * 10 <= cls.rss_polynomial);
    }
}

TEST_CASE("growth classification: the zero solution is polynomial of rate zero") {
    SpectralSolution<double> sol;  // no modes
    auto s = spectral_series(sol, linspace(-5.0, 0.0, 101));
    auto cls = growth_classify(s);
    CHECK(cls.kind == GrowthKind::Polynomial);
    CHECK(cls.rate == 0.0);
}

TEST_CASE("growth classification measures 2 lambda_max on the two-mode solution") {
    auto sol = two_mode();
    auto s = spectral_series(sol, linspace(-recommended_horizon(sol), 0.0, 501));
    auto cls = growth_classify(s);
    CHECK(cls.kind == GrowthKind::Exponential);
    // The final decade is dominated by mode 2: rate ~ 2 lambda_2 = 8.
    CHECK(cls.rate == doctest::Approx(8.0).epsilon(1e-3));
}

TEST_CASE("growth classification guards") {
    auto sol = two_mode();
    FrequencySeries<double> nonancient = spectral_series(sol, linspace(-1.0, 0.0, 11));
    nonancient.records.back().t = 0.5;
    CHECK_THROWS_AS(growth_classify(nonancient), std::invalid_argument);

    FrequencySeries<double> sparse = spectral_series(sol, linspace(-1.0, 0.0, 11));
    sparse.records.resize(1);
    CHECK_THROWS_AS(growth_classify(sparse), std::invalid_argument);
}

TEST_CASE("recommended horizon covers ten e-foldings of the slowest mode") {
    SpectralSolution<double> sol;
    sol.modes = {{1, 1.0}};
    CHECK(recommended_horizon(sol) == doctest::Approx(5.0));
    CHECK(recommended_horizon(sol, 6.0) == doctest::Approx(3.0));
    sol.modes = {{2, 1.0}, {3, 0.5}};
    CHECK(recommended_horizon(sol) == doctest::Approx(10.0 / 8.0));
    SpectralSolution<double> zero;
    CHECK(recommended_horizon(zero) == 1.0);
}

TEST_CASE("simulated single mode recovers the discrete decay rate at second order") {
    // Marching the eigenmode over [-3, 0] gives I ~ e^{-2 lambda_h t}; the
    // classifier must recover 2 lambda_h almost exactly, so the distance to
    // the continuum rate 2 lambda_1 = 2 is pure O(h^2) discretization error.
    double err[2];
    int idx = 0;
    for (Eigen::Index cells : {64, 128}) {
        ProblemParams<double> params{2.0, 1.0, 1,
                                     DomainSpec<double>::interval(0.0, EIGEN_PI, cells),
                                     WeightSpec<double>::zero()};
        Grid<double> g = make_grid(params);
        ArrayX<double> u = eigenmode_data(g, 1, 1.0);
        SchemeConfig<double> scheme;
        auto res = evolve(Field<double>{u, -3.0}, {-3.0, 0.0}, params, g, scheme);
        auto cls = growth_classify(res.series);
        REQUIRE(cls.kind == GrowthKind::Exponential);
        const double s = std::sin(EIGEN_PI * g.h / (2.0 * EIGEN_PI));
        const double lam_h = 4.0 / (g.h * g.h) * s * s;
        CHECK(cls.rate == doctest::Approx(2.0 * lam_h).epsilon(1e-6));
        err[idx++] = std::abs(cls.rate - 2.0);
    }
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.1));  // h^2 halving
}
