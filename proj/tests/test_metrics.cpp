#include <gtest/gtest.h>

#include <random>

#include "insod/metrics.hpp"

using namespace insod;

TEST(HorizontalError, BasicGeometry) {
    const Geodetic a{0.5, 0.3, 100.0};
    EXPECT_EQ(horizontal_error(a, a), 0.0);

    // one arcsecond of latitude at the equator is about 30.9 m
    const double arcsec = M_PI / 180.0 / 3600.0;
    const Geodetic eq{0.0, 0.0, 0.0};
    const Geodetic off{0.0, arcsec, 0.0};
    const auto [re, rn] = radii(0.5 * arcsec);
    EXPECT_NEAR(horizontal_error(eq, off), rn * arcsec, 1e-6);
    EXPECT_NEAR(horizontal_error(eq, off), 30.9, 0.2);

    // symmetry and height-only offsets
    EXPECT_EQ(horizontal_error(eq, off), horizontal_error(off, eq));
    const Geodetic up{0.5, 0.3, 250.0};
    EXPECT_EQ(horizontal_error(a, up), 0.0);
}

namespace {

ErrorSeries linear_series(double a, double b, double d_max = 60e3, double step = 1e3) {
    ErrorSeries s;
    for (double d = step; d <= d_max; d += step)
        s.push_back({d, a + b * d, d / 15.0});
    return s;
}

} // namespace

TEST(Mean20, ConstantAndZero) {
    const auto s = linear_series(50.0, 0.0);
    const auto [abs, rel] = mean20(s);
    EXPECT_NEAR(abs, 50.0, 1e-12);
    EXPECT_GT(rel, 0.0);

    const auto z = linear_series(0.0, 0.0);
    const auto [zabs, zrel] = mean20(z);
    EXPECT_EQ(zabs, 0.0);
    EXPECT_EQ(zrel, 0.0);

    ErrorSeries short_series = linear_series(1.0, 0.0, 10e3);
    EXPECT_THROW(mean20(short_series), InsufficientDistance);
}

TEST(Gra20, ExactLinearFitAndOracle) {
    const auto s = linear_series(5.0, 2e-3);
    const auto [slope, slope_rel] = gra20(s);
    EXPECT_NEAR(slope, 2e-3, 1e-12);

    const auto flat = linear_series(42.0, 0.0);
    EXPECT_NEAR(gra20(flat).first, 0.0, 1e-15);

    // independent normal-equations evaluation on a random series
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    ErrorSeries r;
    for (double d = 21e3; d <= 80e3; d += 500.0)
        r.push_back({d, u(rng), 0.0});
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (const auto& e : r) {
        sx += e.dist;
        sy += e.err;
        sxx += e.dist * e.dist;
        sxy += e.dist * e.err;
        ++n;
    }
    const double slope_ref = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(gra20(r).first, slope_ref, 1e-10);
}

TEST(Max20, OrderStatistics) {
    const auto s = linear_series(0.0, 1e-3);
    EXPECT_NEAR(max20(s), 60.0, 1e-12);
    const auto c = linear_series(50.0, 0.0);
    EXPECT_EQ(max20(c), 50.0);
    EXPECT_GE(max20(c), mean20(c).first);
}

TEST(Metrics, ScaleEquivarianceAndOrderInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    ErrorSeries s;
    for (double d = 1e3; d <= 70e3; d += 777.0)
        s.push_back({d, u(rng), 0.0});

    const MetricsReport base = metrics_report(s);
    ErrorSeries scaled = s;
    for (auto& e : scaled)
        e.err *= 3.0;
    const MetricsReport x3 = metrics_report(scaled);
    EXPECT_NEAR(x3.mean20_abs, 3.0 * base.mean20_abs, 1e-9);
    EXPECT_NEAR(x3.gra20_abs, 3.0 * base.gra20_abs, 1e-12);
    EXPECT_NEAR(x3.max20, 3.0 * base.max20, 1e-9);

    ErrorSeries shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const MetricsReport perm = metrics_report(shuffled);
    EXPECT_EQ(perm.mean20_abs, base.mean20_abs);
    EXPECT_EQ(perm.max20, base.max20);
    EXPECT_NEAR(perm.gra20_abs, base.gra20_abs, 1e-15);
}

TEST(Metrics, ConfigurableThreshold) {
    const auto s = linear_series(10.0, 0.0, 15e3);
    EXPECT_THROW(mean20(s), InsufficientDistance);
    EXPECT_NEAR(mean20(s, 5e3).first, 10.0, 1e-12);
}
