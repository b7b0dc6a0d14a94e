#include "srfilter/error.hpp"
#include "srfilter/events.hpp"
#include "srfilter/ratio.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace srfilter;

namespace {

Matrix column(const std::vector<double>& v)
{
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i)
        m(static_cast<Eigen::Index>(i), 0) = v[i];
    return m;
}

Matrix toy_matrix(const Dataset& ds)
{
    Matrix m(static_cast<Eigen::Index>(ds.size()), 1);
    for (std::size_t i = 0; i < ds.size(); ++i)
        m(static_cast<Eigen::Index>(i), 0) = ds.events[i].features[0];
    return m;
}

} // namespace

TEST_CASE("percentile and trimmed ranges")
{
    std::vector<double> v(1001);
    for (int i = 0; i <= 1000; ++i)
        v[static_cast<std::size_t>(i)] = i;
    CHECK(percentile(v, 0.0) == 0.0);
    CHECK(percentile(v, 100.0) == 1000.0);
    CHECK(percentile(v, 50.0) == 500.0);
    // Linear interpolation on positions (n - 1) p / 100.
    CHECK(percentile(v, 99.5) == doctest::Approx(995.0));
    CHECK(compute_ranges(column(v))[0] == doctest::Approx(990.0));

    std::vector<double> shuffled = v;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(compute_ranges(column(shuffled))[0] == compute_ranges(column(v))[0]);

    CHECK_THROWS_AS(compute_ranges(column(std::vector<double>(50, 2.0))), DataError);
}

TEST_CASE("smearing statistics and determinism")
{
    Matrix z = Matrix::Zero(100000, 2);
    NoiseSpec noise{0.1, {0.5, 3.0}};
    Matrix s = smear(z, noise, 7);
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double mean = s.col(c).mean();
        const double sd = std::sqrt((s.col(c).array() - mean).square().sum() / (s.rows() - 1));
        CHECK(std::abs(sd / noise.per_dim_scale[static_cast<std::size_t>(c)] - 1.0) < 0.05);
    }
    CHECK(smear(z, noise, 7) == s);
    CHECK(smear(z, noise, 8) != s);

    Matrix y = Matrix::Random(20, 2);
    CHECK((smear(y, NoiseSpec{1.0, {1e-300, 1e-300}}, 3) - y).cwiseAbs().maxCoeff() == 0.0);

    NoiseSpec from = NoiseSpec::from_ranges(0.1, {10.0, 2.0});
    CHECK(from.per_dim_scale[0] == doctest::Approx(1.0));
    CHECK(from.per_dim_scale[1] == doctest::Approx(0.2));
    CHECK_THROWS_AS((NoiseSpec{0.1, {0.0}}).validate(), SpecError);
}

TEST_CASE("smeared Gaussian matches the analytic convolution")
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal(3.0, 0.5);
    Matrix z(200000, 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        z(i, 0) = normal(rng);
    Matrix s = smear(z, NoiseSpec{1.0, {2.0}}, 5);
    const double mean = s.col(0).mean();
    const double var = (s.col(0).array() - mean).square().sum() / (s.rows() - 1);
    // N(3, 0.25) * N(0, 4) = N(3, 4.25)
    CHECK(std::abs(mean - 3.0) < 4.0 * std::sqrt(4.25 / 2e5));
    CHECK(std::abs(var / 4.25 - 1.0) < 0.02);
}

TEST_CASE("odds ratio identity and clamp")
{
    CHECK(odds_ratio(0.5, 1.0, 1e-6) == doctest::Approx(1.0));
    CHECK(odds_ratio(0.9, 1.0, 1e-6) == doctest::Approx(9.0));
    CHECK(odds_ratio(0.9, 2.0, 1e-6) == doctest::Approx(18.0));
    const double top = odds_ratio(1.0 - 1e-12, 1.0, 1e-6);
    CHECK(std::isfinite(top));
    CHECK(top == doctest::Approx((1.0 - 1e-6) / 1e-6));
    CHECK(odds_ratio(0.0, 1.0, 1e-6) == doctest::Approx(1e-6 / (1.0 - 1e-6)));
    double prev = 0.0;
    for (double s = 0.01; s < 1.0; s += 0.01) {
        CHECK(odds_ratio(s, 1.0, 1e-6) > prev);
        prev = odds_ratio(s, 1.0, 1e-6);
    }
}

TEST_CASE("ratio of identical populations is near one despite class imbalance")
{
    Toy1dParams same;
    same.background_mean4b = same.mean3b;
    same.background_sd4b = same.sd3b;
    auto [d3, d4] = generate_toy1d(40000, 20000, 0.0, 21, same);
    TrainConfig cfg;
    cfg.max_epochs = 20;
    auto model = fit_ratio(toy_matrix(d3), toy_matrix(d4), MLPSpec{{1, 32, 32, 1}}, cfg, 4);
    CHECK(model.rho == doctest::Approx(2.0));
    CHECK(model.kind == RatioKind::Plain);
    // Within the bulk of the data (|x - 1| < 2 sd) the ratio stays near one.
    for (double x = -3.0; x <= 5.0; x += 0.5) {
        const double r = eval_ratio(model, std::span<const double>(&x, 1));
        CHECK(r == doctest::Approx(1.0).epsilon(0.15));
    }
}

TEST_CASE("duplicating class-0 data doubles rho and keeps the ratio")
{
    auto [d3, d4] = generate_toy1d(20000, 20000, 0.0, 31);
    Matrix z3 = toy_matrix(d3), z4 = toy_matrix(d4);
    Matrix z3dup(2 * z3.rows(), 1);
    z3dup << z3, z3;
    TrainConfig cfg;
    cfg.max_epochs = 20;
    auto a = fit_ratio(z3, z4, MLPSpec{{1, 32, 32, 1}}, cfg, 6);
    auto b = fit_ratio(z3dup, z4, MLPSpec{{1, 32, 32, 1}}, cfg, 6);
    CHECK(b.rho == doctest::Approx(2.0 * a.rho));
    for (double x = -4.0; x <= 6.0; x += 1.0) {
        const double ra = eval_ratio(a, std::span<const double>(&x, 1));
        const double rb = eval_ratio(b, std::span<const double>(&x, 1));
        const double truth = std::exp(-x / 8.0); // N(-1,16)/N(1,16)
        CHECK(ra == doctest::Approx(truth).epsilon(0.2));
        CHECK(rb == doctest::Approx(truth).epsilon(0.2));
    }
}

TEST_CASE("tiny smoothing approximates the plain ratio")
{
    auto [d3, d4] = generate_toy1d(20000, 20000, 0.0, 41);
    Matrix z3 = toy_matrix(d3), z4 = toy_matrix(d4);
    TrainConfig cfg;
    cfg.max_epochs = 20;
    auto plain = fit_ratio(z3, z4, MLPSpec{{1, 32, 32, 1}}, cfg, 6);
    auto smooth = fit_smoothed_ratio(z3, z4, NoiseSpec{1e-6, {1e-6}}, MLPSpec{{1, 32, 32, 1}}, cfg, 6);
    CHECK(smooth.kind == RatioKind::Smoothed);
    REQUIRE(smooth.noise.has_value());
    for (double x = -4.0; x <= 6.0; x += 1.0) {
        const double ratio = eval_ratio(plain, std::span<const double>(&x, 1)) /
                             eval_ratio(smooth, std::span<const double>(&x, 1));
        CHECK(ratio == doctest::Approx(1.0).epsilon(0.15));
    }
    auto again = fit_smoothed_ratio(z3, z4, NoiseSpec{1e-6, {1e-6}}, MLPSpec{{1, 32, 32, 1}}, cfg, 6);
    CHECK(again.classifier.layers[0].weights == smooth.classifier.layers[0].weights);
}

TEST_CASE("ratio model persistence and dimension checks")
{
    testing::TempDir dir("ratio");
    auto [d3, d4] = generate_toy1d(2000, 2000, 0.05, 2);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    auto m = fit_smoothed_ratio(toy_matrix(d3), toy_matrix(d4), NoiseSpec{2.0, {2.0}}, MLPSpec{{1, 8, 1}}, cfg, 1);
    save_ratio(m, dir / "g.model");
    auto back = load_ratio(dir / "g.model");
    CHECK(back.rho == m.rho);
    CHECK(back.delta == m.delta);
    CHECK(back.kind == RatioKind::Smoothed);
    CHECK(back.noise->per_dim_scale == m.noise->per_dim_scale);
    for (double x : {-3.0, 0.0, 7.0})
        CHECK(eval_ratio(back, std::span<const double>(&x, 1)) == eval_ratio(m, std::span<const double>(&x, 1)));
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(eval_ratio(m, two), DimensionError);
}
