#include "srfilter/error.hpp"
#include "srfilter/region.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace srfilter;

TEST_CASE("threshold is an order statistic with closed membership")
{
    std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto r = calibrate_threshold(s, 0.3);
    CHECK(r.tau_s == 8.0);
    CHECK(std::count_if(s.begin(), s.end(), [&](double v) { return in_sr(r, v); }) == 3);
    CHECK(in_sr(r, 8.0));
    CHECK_FALSE(in_sr(r, 8.0 - 1e-12));

    auto all = calibrate_threshold(s, 1.0);
    CHECK(std::all_of(s.begin(), s.end(), [&](double v) { return in_sr(all, v); }));

    std::vector<double> ties(20, 1.5);
    auto t = calibrate_threshold(ties, 0.1);
    CHECK(std::all_of(ties.begin(), ties.end(), [&](double v) { return in_sr(t, v); }));

    CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.5), DataError);
    CHECK(sr_member_count(0.1, 1000) == 100);
    CHECK(sr_member_count(0.3, 10) == 3);
    CHECK(sr_member_count(0.001, 10) == 1);
}

TEST_CASE("regions nest and realize at least q")
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s(257 + trial * 13);
        for (auto& v : s)
            v = normal(rng);
        auto grid = default_q_grid();
        std::size_t prev = 0;
        for (double q : grid) {
            auto r = calibrate_threshold(s, q);
            auto count = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) { return in_sr(r, v); }));
            CHECK(count >= prev);
            CHECK(static_cast<double>(count) / static_cast<double>(s.size()) >= q - 1e-12);
            CHECK(count == sr_member_count(q, s.size()));
            prev = count;
        }
    }
}

TEST_CASE("positive rescaling of scores leaves membership unchanged")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    std::vector<double> s(500), scaled(500);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        scaled[i] = 3.7 * s[i];
    }
    for (double q : {0.05, 0.2, 0.7}) {
        auto a = calibrate_threshold(s, q);
        auto b = calibrate_threshold(scaled, q);
        for (std::size_t i = 0; i < s.size(); ++i)
            CHECK(in_sr(a, s[i]) == in_sr(b, scaled[i]));
    }
}

TEST_CASE("default q grid")
{
    auto g = default_q_grid();
    REQUIRE(g.size() == 50);
    CHECK(g.front() == doctest::Approx(0.005));
    CHECK(g.back() == 1.0);
    for (std::size_t i = 1; i < g.size(); ++i)
        CHECK(g[i] / g[i - 1] == doctest::Approx(g[1] / g[0]));
}

TEST_CASE("random scores give a diagonal curve")
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u;
    const std::size_t n = 20000;
    std::vector<double> scores(n);
    std::vector<Truth> truth(n);
    std::size_t n_sig = 0;
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = u(rng);
        truth[i] = u(rng) < 0.05 ? Truth::Signal : Truth::Background;
        n_sig += truth[i] == Truth::Signal;
    }
    auto grid = default_q_grid();
    auto curve = enrichment_curve(scores, truth, grid);
    for (const auto& pt : curve.points) {
        REQUIRE(pt.s_in_sr.has_value());
        const double p = pt.p4b_in_sr;
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n_sig));
        CHECK(std::abs(*pt.s_in_sr - p) <= 4.0 * se + 1e-12);
    }
    CHECK(curve.points.back().p4b_in_sr == 1.0);
    CHECK(*curve.points.back().s_in_sr == 1.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].p4b_in_sr >= curve.points[i - 1].p4b_in_sr);
        CHECK(*curve.points[i].s_in_sr >= *curve.points[i - 1].s_in_sr);
    }
}

TEST_CASE("separating scores capture all signal once q covers it")
{
    const std::size_t n = 1000;
    std::vector<double> scores(n);
    std::vector<Truth> truth(n, Truth::Background);
    for (std::size_t i = 0; i < n; ++i)
        scores[i] = static_cast<double>(i);
    for (std::size_t i = n - 50; i < n; ++i)
        truth[i] = Truth::Signal; // top 5%
    std::vector<double> grid{0.01, 0.05, 0.1, 0.5, 1.0};
    auto curve = enrichment_curve(scores, truth, grid);
    CHECK(*curve.points[0].s_in_sr == doctest::Approx(0.2));
    for (std::size_t k = 1; k < grid.size(); ++k)
        CHECK(*curve.points[k].s_in_sr == 1.0);
}

TEST_CASE("no signal events leaves the signal coordinate undefined")
{
    std::vector<double> scores{1, 2, 3, 4};
    std::vector<Truth> truth(4, Truth::Background);
    std::vector<double> grid{0.5, 1.0};
    auto curve = enrichment_curve(scores, truth, grid);
    for (const auto& pt : curve.points)
        CHECK_FALSE(pt.s_in_sr.has_value());
}

TEST_CASE("curve area")
{
    EnrichmentCurve diag;
    for (double p : {0.1, 0.3, 0.6})
        diag.points.push_back({p, 0.0, p, p});
    CHECK(curve_auc(diag) == doctest::Approx(0.5));

    const double eps = 0.05;
    EnrichmentCurve perfect;
    perfect.points.push_back({eps, 0.0, eps, 1.0});
    perfect.points.push_back({0.5, 0.0, 0.5, 1.0});
    CHECK(curve_auc(perfect) == doctest::Approx(1.0 - eps / 2.0));
}

TEST_CASE("aggregation across repeats")
{
    EnrichmentCurve a, b;
    a.points.push_back({0.1, 1.0, 0.1, 0.4});
    b.points.push_back({0.1, 2.0, 0.1, 0.6});
    std::vector<EnrichmentCurve> two{a, b};
    auto agg = aggregate_curves(two);
    CHECK(*agg.mean.points[0].s_in_sr == doctest::Approx(0.5));
    REQUIRE(agg.s_std[0].has_value());
    CHECK(*agg.s_std[0] == doctest::Approx(0.1414213562));
    CHECK(agg.count == 2);

    std::vector<EnrichmentCurve> same(10, a);
    auto flat = aggregate_curves(same);
    CHECK(*flat.s_std[0] < 1e-12);

    std::vector<EnrichmentCurve> one{a};
    auto single = aggregate_curves(one);
    CHECK(*single.mean.points[0].s_in_sr == 0.4);
    CHECK_FALSE(single.s_std[0].has_value());

    EnrichmentCurve c;
    c.points.push_back({0.2, 1.0, 0.2, 0.4});
    std::vector<EnrichmentCurve> mismatched{a, c};
    CHECK_THROWS_AS(aggregate_curves(mismatched), SpecError);
}

TEST_CASE("curve CSV round trip")
{
    testing::TempDir dir("curve");
    EnrichmentCurve c;
    c.metadata["eta"] = "0.1";
    c.points.push_back({0.1, 1.25, 0.1, 0.3});
    c.points.push_back({1.0, -2.0, 1.0, std::nullopt});
    write_curve(c, dir / "c.csv");
    auto back = read_curve(dir / "c.csv");
    CHECK(back.metadata.at("eta") == "0.1");
    REQUIRE(back.points.size() == 2);
    CHECK(back.points[0].tau == 1.25);
    CHECK(*back.points[0].s_in_sr == 0.3);
    CHECK_FALSE(back.points[1].s_in_sr.has_value());
}
