#include <gtest/gtest.h>

#include <random>

#include "insod/frames.hpp"
#include "oracles.hpp"

using namespace insod;

namespace {

constexpr double kPi = M_PI;

// n-frame (N-U-E) axes in ECEF, used as the independent geometry oracle.
Dcm c_ne_of(const Geodetic& p) {
    const double cl = std::cos(p.lat), sl = std::sin(p.lat);
    const double cg = std::cos(p.lon), sg = std::sin(p.lon);
    Dcm c;
    c.col(0) = Vec3(-sl * cg, -sl * sg, cl); // north
    c.col(1) = Vec3(cl * cg, cl * sg, sl);   // up
    c.col(2) = Vec3(-sg, cg, 0.0);           // east
    return c;
}

} // namespace

TEST(Skew, CrossProductIdentity) {
    EXPECT_EQ((skew(Vec3(1, 0, 0)) * Vec3(0, 1, 0) - Vec3(0, 0, 1)).norm(), 0.0);
    EXPECT_TRUE(skew(Vec3::Zero()).isZero(0.0));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 50; ++i) {
        const Vec3 v(u(rng), u(rng), u(rng));
        const Vec3 w(u(rng), u(rng), u(rng));
        EXPECT_LT((skew(v) * v).norm(), 1e-14 * v.squaredNorm());
        EXPECT_LT((skew(v) * w - v.cross(w)).norm(), 1e-12);
        EXPECT_TRUE(skew(v).transpose().isApprox(-skew(v), 0.0));
    }
}

TEST(Radii, EquatorAndPole) {
    const auto [re0, rn0] = radii(0.0);
    EXPECT_LT(rn0, re0); // oblateness

    // independent closed-form evaluation at the equator: W = 1
    const double a = wgs84().a, e2 = wgs84().e2;
    EXPECT_NEAR(re0, a, 1e-6 * a);
    EXPECT_NEAR(rn0, a * (1.0 - e2), 1e-6 * a);

    const auto [re9, rn9] = radii(kPi / 2.0);
    EXPECT_NEAR(re9, rn9, 1e-6);
}

TEST(Radii, LatitudeDerivativeMatchesFiniteDifference) {
    for (double lat : {-1.2, -0.4, 0.3, 0.9, 1.4}) {
        const auto [dre, drn] = radii_dlat(lat);
        const double h = 1e-6;
        const auto [re_p, rn_p] = radii(lat + h);
        const auto [re_m, rn_m] = radii(lat - h);
        EXPECT_NEAR(dre, (re_p - re_m) / (2 * h), 1e-3);
        EXPECT_NEAR(drn, (rn_p - rn_m) / (2 * h), 1e-3);
    }
}

TEST(CurvatureMatrix, ZeroPatternAndValues) {
    const Geodetic p{0.3, deg(45.0), 100.0};
    const Mat3 rc = curvature_matrix(p);

    int nonzero = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (rc(i, j) != 0.0)
                ++nonzero;
    EXPECT_EQ(nonzero, 3);

    const auto [re, rn] = radii(p.lat);
    EXPECT_NEAR(rc(0, 2), 1.0 / ((re + p.h) * std::cos(p.lat)), 1e-18);
    EXPECT_NEAR(rc(1, 0), 1.0 / (rn + p.h), 1e-18);
    EXPECT_EQ(rc(2, 1), 1.0);

    const Mat3 rc0 = curvature_matrix({0.0, 0.0, 0.0});
    EXPECT_EQ(rc0(2, 1), 1.0);
}

TEST(CurvatureMatrix, PolarSingularityIsHardError) {
    EXPECT_THROW(curvature_matrix({0.0, kPi / 2.0, 0.0}), PolarSingularity);
    EXPECT_THROW(transport_rate(Vec3(1, 0, 0), {0.0, -kPi / 2.0, 0.0}), PolarSingularity);
}

TEST(CurvatureMatrix, PureUpVelocityMovesOnlyHeight) {
    const Geodetic p{0.1, 0.7, 30.0};
    const Vec3 pdot = curvature_matrix(p) * Vec3(0.0, 2.5, 0.0);
    EXPECT_EQ(pdot(0), 0.0);
    EXPECT_EQ(pdot(1), 0.0);
    EXPECT_EQ(pdot(2), 2.5);
}

TEST(EarthRate, EquatorPoleAndNorm) {
    const double w = wgs84().omega_ie;
    EXPECT_TRUE(earth_rate_n(0.0).isApprox(w * Vec3(1, 0, 0), 1e-15));
    EXPECT_TRUE(earth_rate_n(kPi / 2.0).isApprox(w * Vec3(0, 1, 0), 1e-9));
    for (double lat : {-0.9, 0.2, 1.1}) {
        EXPECT_NEAR(earth_rate_n(lat).norm(), w, 1e-18);
        EXPECT_EQ(earth_rate_n(lat)(2), 0.0);
    }
}

TEST(EarthRate, JacobianMatchesFiniteDifference) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.3, 1.3);
    for (int i = 0; i < 20; ++i) {
        const double lat = u(rng);
        const Mat3 jac = earth_rate_jacobian(lat);
        const double h = 1e-7;
        const Vec3 fd = (earth_rate_n(lat + h) - earth_rate_n(lat - h)) / (2 * h);
        EXPECT_LT((jac.col(1) - fd).norm(), 1e-8 * fd.norm());
    }
}

TEST(TransportRate, ZeroVelocityAndLinearity) {
    const Geodetic p{0.2, 0.5, 10.0};
    EXPECT_TRUE(transport_rate(Vec3::Zero(), p).isZero(0.0));
    const Vec3 v(3.0, -1.0, 7.0);
    EXPECT_TRUE((2.0 * transport_rate(v, p)).isApprox(transport_rate(2.0 * v, p), 1e-14));
}

TEST(TransportRate, MatchesFiniteDifferencedFramePropagation) {
    // rotate the n frame by following pdot = R_c v for a short time and read
    // the rotation vector off the ECEF frame change
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Geodetic p{u(rng), 0.9 * u(rng), 50.0 * u(rng)};
        const Vec3 v(20.0 * u(rng), 2.0 * u(rng), 20.0 * u(rng));
        const double dt = 1e-3;
        const Vec3 pdot = curvature_matrix(p) * v;
        const Geodetic p1{p.lon + pdot(0) * dt, p.lat + pdot(1) * dt, p.h + pdot(2) * dt};
        const Mat3 rel = c_ne_of(p).transpose() * c_ne_of(p1); // n(t)->n(t+dt) in n(t)
        const Vec3 w_fd(0.5 * (rel(2, 1) - rel(1, 2)) / dt, 0.5 * (rel(0, 2) - rel(2, 0)) / dt,
                        0.5 * (rel(1, 0) - rel(0, 1)) / dt);
        const Vec3 w = transport_rate(v, p);
        EXPECT_LT((w - w_fd).norm(), 1e-8 + 1e-4 * w.norm()) << "trial " << trial;
    }

    // pure east velocity at the equator: rotation about north only
    const Vec3 w_eq = transport_rate(Vec3(0, 0, 10), {0.0, 0.0, 0.0});
    EXPECT_GT(std::abs(w_eq(0)), 0.0);
    EXPECT_EQ(w_eq(1), 0.0);
    EXPECT_EQ(w_eq(2), 0.0);
}

TEST(ElementaryRotation, IdentityInverseAndDerivatives) {
    EXPECT_TRUE(elementary_rotation(2, 0.0).isIdentity(0.0));
    const double th = 0.37;
    EXPECT_TRUE((elementary_rotation(3, th) * elementary_rotation(3, -th)).isIdentity(1e-15));

    // derivative sign pattern at zero angle
    const auto [dm2_0, dm3_0] = d_mount(0.0, 0.0);
    EXPECT_EQ(dm3_0(0, 1), 1.0);
    EXPECT_EQ(dm3_0(1, 0), -1.0);
    EXPECT_EQ(dm2_0(0, 2), -1.0);

    // symbolic layout of the derivative matrices against the rotations
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < 20; ++i) {
        const double psi = u(rng), theta = u(rng);
        const auto [dm2, dm3] = d_mount(theta, psi);
        const double h = 1e-6;
        const Mat3 fd2 =
            (elementary_rotation(2, psi + h) - elementary_rotation(2, psi - h)) / (2 * h);
        const Mat3 fd3 =
            (elementary_rotation(3, theta + h) - elementary_rotation(3, theta - h)) / (2 * h);
        EXPECT_LT((dm2 - fd2).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((dm3 - fd3).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(MountDcm, CompositionAndReduction) {
    EXPECT_TRUE(mount_dcm(0, 0, 0).isIdentity(0.0));
    EXPECT_TRUE(mount_dcm(0, 0.3, 0).isApprox(elementary_rotation(3, 0.3), 1e-15));

    const double theta = deg(2.0), psi = deg(3.0);
    const Dcm composed =
        elementary_rotation(1, 0.0) * elementary_rotation(3, theta) * elementary_rotation(2, psi);
    EXPECT_TRUE(mount_dcm(0.0, theta, psi).isApprox(composed, 1e-15));
}

TEST(MountDcm, AllReturnedDcmsOrthonormal) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < 50; ++i) {
        const Dcm c = mount_dcm(u(rng), u(rng), u(rng));
        EXPECT_LT((c * c.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(c.determinant(), 1.0, 1e-9);
    }
    for (int i = 0; i < 20; ++i) {
        const Dcm c = rotvec_to_dcm(Vec3(u(rng), u(rng), u(rng)));
        EXPECT_LT((c * c.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(c.determinant(), 1.0, 1e-9);
    }
}

TEST(Gravity, FrameConventionAndMagnitude) {
    for (double lat : {-1.0, 0.0, 0.8}) {
        const Vec3 g = gravity(lat, 123.0);
        EXPECT_EQ(g(0), 0.0);
        EXPECT_EQ(g(2), 0.0);
        EXPECT_LT(g(1), 0.0);
    }
    const double g45 = gravity_magnitude(deg(45.0), 0.0);
    EXPECT_GT(g45, 9.79);
    EXPECT_LT(g45, 9.82);

    double prev = gravity_magnitude(0.6, 0.0);
    for (double h = 500.0; h <= 10000.0; h += 500.0) {
        const double g = gravity_magnitude(0.6, h);
        EXPECT_LT(g, prev);
        prev = g;
    }
}

TEST(Gravity, GradientMatchesFiniteDifference) {
    for (double lat : {-0.9, 0.1, 1.2}) {
        for (double h : {0.0, 800.0}) {
            const auto [dgdl, dgdh] = gravity_gradient(lat, h);
            const double e = 1e-5;
            EXPECT_NEAR(dgdl,
                        (gravity_magnitude(lat + e, h) - gravity_magnitude(lat - e, h)) / (2 * e),
                        1e-8);
            EXPECT_NEAR(dgdh,
                        (gravity_magnitude(lat, h + 1.0) - gravity_magnitude(lat, h - 1.0)) / 2.0,
                        1e-12);
        }
    }
}

TEST(WrapPi, Range) {
    EXPECT_NEAR(wrap_pi(3.0 * kPi), kPi, 1e-12);
    EXPECT_NEAR(wrap_pi(-3.0 * kPi), kPi, 1e-12);
    EXPECT_NEAR(wrap_pi(0.1), 0.1, 1e-15);
    EXPECT_NEAR(wrap_pi(-0.1), -0.1, 1e-15);
}
