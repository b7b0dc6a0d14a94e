#include "srfilter/error.hpp"
#include "srfilter/oracle.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace srfilter;
using testing::normal_pdf;

namespace {

// Toy densities written out directly, independent of the mixture code.
double p3(double x) { return normal_pdf(x, 1.0, 4.0); }
double p4(double x, double eps) { return (1.0 - eps) * normal_pdf(x, -1.0, 4.0) + eps * normal_pdf(x, 7.0, 0.5); }
double p3k(double x) { return normal_pdf(x, 1.0, std::sqrt(20.0)); }
double p4k(double x, double eps)
{
    return (1.0 - eps) * normal_pdf(x, -1.0, std::sqrt(20.0)) + eps * normal_pdf(x, 7.0, std::sqrt(4.25));
}

} // namespace

TEST_CASE("mixture densities")
{
    double zero = 0.0;
    CHECK(mixture_pdf(single_gaussian({0.0}, {1.0}), zero) == doctest::Approx(0.3989422804));
    MixtureSpec sym{{{0.5, {-1.5}, {1.0}}, {0.5, {1.5}, {1.0}}}};
    for (double x : {0.3, 1.0, 2.7})
        CHECK(mixture_pdf(sym, x) == doctest::Approx(mixture_pdf(sym, -x)).epsilon(1e-14));
    auto s = toy_oracle_setting();
    CHECK(mixture_pdf(s.spec3b, 7.0) == doctest::Approx(0.03239).epsilon(1e-3));
    // log-space evaluation stays finite far into the tails
    for (double x = -50.0; x <= 50.0; x += 0.5) {
        CHECK(std::isfinite(exact_gamma(s, x)));
        CHECK(exact_score(s, x) > 0.0);
    }
}

TEST_CASE("convolution adds variances")
{
    auto c = convolve_spec(single_gaussian({7.0}, {0.25}), std::vector<double>{4.0});
    CHECK(c.components[0].variances[0] == doctest::Approx(4.25));
    CHECK(c.components[0].mean[0] == 7.0);
    auto same = convolve_spec(single_gaussian({7.0}, {0.25}), std::vector<double>{0.0});
    CHECK(same.components[0].variances[0] == 0.25);
}

TEST_CASE("exact ratios match direct evaluation")
{
    auto s = toy_oracle_setting(0.05, 2.0);
    for (double x = -8.0; x <= 12.0; x += 0.25) {
        CHECK(exact_gamma(s, x) == doctest::Approx(p4(x, 0.05) / p3(x)).epsilon(1e-12));
        CHECK(exact_gamma_tilde(s, x) == doctest::Approx(p4k(x, 0.05) / p3k(x)).epsilon(1e-12));
    }
    const double score7 = (p4(7.0, 0.05) / p3(7.0)) / (p4k(7.0, 0.05) / p3k(7.0));
    CHECK(exact_score(s, 7.0) == doctest::Approx(score7).epsilon(1e-12));
    CHECK(exact_gamma(s, 7.0) == doctest::Approx(1.628).epsilon(2e-3));
    CHECK(exact_gamma_tilde(s, 7.0) == doctest::Approx(0.739).epsilon(2e-3));
    CHECK(exact_score(s, 7.0) == doctest::Approx(2.20).epsilon(5e-3));

    OracleSetting flat = s;
    flat.spec4b = flat.spec3b;
    flat.signal_components.clear();
    for (double x : {-5.0, 0.0, 7.0})
        CHECK(exact_score(flat, x) == doctest::Approx(1.0));
}

TEST_CASE("interval masses and adaptive quadrature agree")
{
    auto s = toy_oracle_setting();
    for (auto [a, b] : {std::pair{-3.0, 2.0}, std::pair{6.0, 8.0}, std::pair{-40.0, 40.0}}) {
        const double cdf = mixture_interval_mass(s.spec4b, a, b);
        const double quad = adaptive_simpson([&](double x) { return p4(x, 0.05); }, a, b, 1e-11);
        CHECK(cdf == doctest::Approx(quad).epsilon(1e-8));
    }
    CHECK(mixture_interval_mass(s.spec3b, -1e3, 1e3) == doctest::Approx(1.0));
}

TEST_CASE("grid argmax")
{
    auto s = toy_oracle_setting();
    auto grid = uniform_grid(-10.0, 12.0, 0.01);
    const double score_peak = argmax_on_grid([&](double x) { return exact_score(s, x); }, grid);
    CHECK(score_peak >= 6.5);
    CHECK(score_peak <= 7.5);
    CHECK(argmax_on_grid([&](double x) { return exact_gamma(s, x); }, grid) == doctest::Approx(-10.0));
    CHECK(argmax_on_grid([](double) { return 1.0; }, grid) == doctest::Approx(-10.0));
    CHECK(grid.size() == 2201);
}

TEST_CASE("exact curve structure")
{
    auto s = toy_oracle_setting();
    auto grid = std::vector<double>{0.01, 0.05, 0.1, 0.3, 0.6, 1.0};
    auto flat = exact_curve_1d(s, [](double) { return 1.0; }, grid);
    for (const auto& pt : flat.points) {
        CHECK(pt.p4b_in_sr == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(*pt.s_in_sr == doctest::Approx(1.0).epsilon(1e-6));
    }
    auto curve = exact_curve_1d(s, [&](double x) { return exact_score(s, x); }, grid);
    auto gamma_curve = exact_curve_1d(s, [&](double x) { return exact_gamma(s, x); }, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(curve.points[i].p4b_in_sr >= grid[i] - 1e-6);
        if (i > 0) {
            CHECK(curve.points[i].p4b_in_sr >= curve.points[i - 1].p4b_in_sr);
            CHECK(*curve.points[i].s_in_sr >= *curve.points[i - 1].s_in_sr);
        }
    }
    CHECK(curve.points.back().p4b_in_sr == doctest::Approx(1.0).epsilon(1e-6));
    // Small regions are enriched, and more so than regions ranked by gamma.
    const auto& small = curve.points[1];
    CHECK(*small.s_in_sr / small.p4b_in_sr > 3.0);
    CHECK(*small.s_in_sr / small.p4b_in_sr > *gamma_curve.points[1].s_in_sr / gamma_curve.points[1].p4b_in_sr);
}

TEST_CASE("Monte Carlo curve agrees with the exact curve")
{
    auto s = toy_oracle_setting();
    std::vector<double> grid{0.05, 0.2, 0.5};
    auto score = [&](double x) { return exact_score(s, x); };
    auto exact = exact_curve_1d(s, score, grid);
    auto mc = monte_carlo_curve(s, [&](std::span<const double> x) { return exact_score(s, x); }, grid, 400000, 3);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(mc.curve.points[i].p4b_in_sr == doctest::Approx(exact.points[i].p4b_in_sr).epsilon(0.02));
        CHECK(std::abs(*mc.curve.points[i].s_in_sr - *exact.points[i].s_in_sr) < 4.0 * mc.s_stderr[i] + 1e-3);
    }
}

TEST_CASE("setting files round trip")
{
    testing::TempDir dir("oracle");
    auto s = toy_oracle_setting(0.1, 1.5);
    save_setting(s, dir / "s.txt");
    auto back = load_setting(dir / "s.txt");
    CHECK(back.kernel_variances == s.kernel_variances);
    CHECK(back.signal_components == s.signal_components);
    for (double x : {-2.0, 7.0})
        CHECK(exact_score(back, x) == exact_score(s, x));
    CHECK(back.epsilon() == doctest::Approx(0.1));

    OracleSetting bad = s;
    bad.kernel_variances = {1.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), SpecError);
}
