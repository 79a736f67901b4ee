#include <gtest/gtest.h>

#include <random>

#include "insod/strapdown.hpp"
#include "oracles.hpp"

using namespace insod;
using oracles::MotionStep;

namespace {

NavState static_state(double lat, double h) {
    NavState s;
    s.c_bn = rotvec_to_dcm(Vec3(0.2, -0.4, 0.6)); // arbitrary fixed attitude
    s.v_n = Vec3::Zero();
    s.p = {0.3, lat, h};
    return s;
}

} // namespace

TEST(ConingCoeffs, ConstantAndStepRates) {
    const double t = 0.02;
    const Vec3 c(1e-3, -2e-3, 3e-3);

    const auto cc1 = coning_coeffs(c, c, t);
    EXPECT_LT(cc1.a_w.norm(), 1e-18);
    EXPECT_TRUE(cc1.b_w.isApprox(2.0 * c / t, 1e-15));

    const auto cc2 = coning_coeffs(Vec3::Zero(), c, t);
    EXPECT_TRUE(cc2.a_w.isApprox(4.0 * c / (t * t), 1e-15));
    EXPECT_TRUE(cc2.b_w.isApprox(-c / t, 1e-15));
}

TEST(ConingCoeffs, ReconstructionIdentity) {
    // the fitted linear rate must integrate back to the two increments
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-5e-3, 5e-3);
    const double t = 0.02;
    for (int i = 0; i < 100; ++i) {
        const Vec3 d1(u(rng), u(rng), u(rng));
        const Vec3 d2(u(rng), u(rng), u(rng));
        const auto cc = coning_coeffs(d1, d2, t);
        const auto integral = [&](double a, double b) {
            return Vec3(0.5 * cc.a_w * (b * b - a * a) + cc.b_w * (b - a));
        };
        EXPECT_LT((integral(0, t / 2) - d1).norm(), 1e-12);
        EXPECT_LT((integral(0, t) - (d1 + d2)).norm(), 1e-12);
    }
}

TEST(AttitudeUpdate, ZeroInputsAndSingleAxisExactness) {
    const Dcm c0 = rotvec_to_dcm(Vec3(0.1, 0.2, -0.3));
    const Dcm c1 = attitude_update(c0, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), 0.02);
    EXPECT_TRUE(c1.isApprox(c0, 1e-14));

    // constant rate 0.1 rad/s about body x, one 0.02 s step
    const double w = 0.1, t = 0.02;
    const Vec3 dth = Vec3(w * t / 2.0, 0, 0);
    const Dcm c2 = attitude_update(Dcm::Identity(), dth, dth, Vec3::Zero(), t);
    const double angle = std::acos(std::min(1.0, (c2.trace() - 1.0) / 2.0));
    EXPECT_NEAR(angle, w * t, 1e-12);
}

TEST(AttitudeUpdate, ConingMotionAgainstFineQuaternionIntegration) {
    // classic two-axis sinusoid, increments taken as exact integrals
    const double amp = 0.05, omega = 2.0 * M_PI * 5.0, t = 0.02;
    const auto int_rate = [&](double a, double b) {
        return Vec3(amp / omega * (std::sin(omega * b) - std::sin(omega * a)),
                    -amp / omega * (std::cos(omega * b) - std::cos(omega * a)), 0.0);
    };

    Dcm c_test = Dcm::Identity();
    Dcm c_ref = Dcm::Identity();
    const int substeps = 400; // 20 kHz reference
    for (int k = 0; k < 50; ++k) {
        const double t0 = k * t;
        c_test = attitude_update(c_test, int_rate(t0, t0 + t / 2), int_rate(t0 + t / 2, t0 + t),
                                 Vec3::Zero(), t);
        for (int i = 0; i < substeps; ++i) {
            const double a = t0 + i * (t / substeps), b = t0 + (i + 1) * (t / substeps);
            c_ref = c_ref * rotvec_to_dcm(int_rate(a, b));
        }
    }
    const Dcm rel = c_ref.transpose() * c_test;
    const double drift = std::acos(std::min(1.0, (rel.trace() - 1.0) / 2.0));
    // 2-sample coning residual over 1 s of fast two-axis motion
    EXPECT_LT(drift, 2e-7);
    EXPECT_LT((c_test * c_test.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(VelocityUpdate, StaticBalanceIsExact) {
    // zero angular increments mean a body static w.r.t. inertial space, so the
    // reduction is exact on a non-rotating earth model
    EarthModel em = wgs84();
    em.omega_ie = 0.0;
    const NavState s = static_state(0.7, 120.0);
    const double t = 0.02;
    const Vec3 f_b = -s.c_nb() * gravity(s.p.lat, s.p.h, em);
    const Vec3 dv = f_b * (t / 2.0);
    const Vec3 v1 = velocity_update(s, Vec3::Zero(), Vec3::Zero(), dv, dv, Vec3::Zero(), t, em);
    EXPECT_LT(v1.norm(), 1e-12);
}

TEST(VelocityUpdate, FreeFallGainsGravity) {
    EarthModel em = wgs84();
    em.omega_ie = 0.0;
    NavState s = static_state(0.4, 1000.0);
    const double t = 0.02;
    const Vec3 v1 = velocity_update(s, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
                                    Vec3::Zero(), t, em);
    EXPECT_TRUE(v1.isApprox(gravity(s.p.lat, s.p.h, em) * t, 1e-9));
}

TEST(VelocityUpdate, FineIntegrationOracle) {
    // random mild profiles, reference integrated at 1 kHz with RK4
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double t = 0.02;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        NavState s;
        s.c_bn = rotvec_to_dcm(Vec3(u(rng), u(rng), u(rng)) * M_PI);
        s.v_n = Vec3(u(rng) * 25.0, u(rng) * 1.0, u(rng) * 25.0);
        s.p = {u(rng), 0.9 * u(rng), 200.0 * u(rng)};

        const Vec3 w0 = Vec3(u(rng), u(rng), u(rng)) * 0.15;
        const Vec3 w1 = w0 + Vec3(u(rng), u(rng), u(rng)) * 0.03;
        const Vec3 f0 = Vec3(u(rng), u(rng), u(rng)) * 2.0 - s.c_nb() * gravity(s.p.lat, s.p.h);
        const Vec3 f1 = f0 + Vec3(u(rng), u(rng), u(rng)) * 0.05;

        const auto rate = [&](double tau) { return Vec3(w0 + (w1 - w0) * (tau / t)); };
        const auto sf = [&](double tau) { return Vec3(f0 + (f1 - f0) * (tau / t)); };
        const auto int_lin = [&](const Vec3& a, const Vec3& b, double ta, double tb) {
            const Vec3 slope = (b - a) / t;
            return Vec3(a * (tb - ta) + 0.5 * slope * (tb * tb - ta * ta));
        };

        Dcm c = s.c_bn;
        Vec3 v = s.v_n;
        Geodetic p = s.p;
        const int n = 20;
        const double h = t / n;
        struct D {
            Mat3 cdot;
            Vec3 vdot;
            Vec3 pdot;
        };
        for (int i = 0; i < n; ++i) {
            const double tau = i * h;
            const auto deriv = [&](double dtau, const Dcm& ci, const Vec3& vi, const Geodetic& pi) {
                const Vec3 w_in = earth_rate_n(pi.lat) + transport_rate(vi, pi);
                const Vec3 w_nb = rate(tau + dtau) - ci.transpose() * w_in;
                D d;
                d.cdot = ci * skew(w_nb);
                d.vdot = ci * sf(tau + dtau) -
                         (2.0 * earth_rate_n(pi.lat) + transport_rate(vi, pi)).cross(vi) +
                         gravity(pi.lat, pi.h);
                d.pdot = curvature_matrix(pi) * vi;
                return d;
            };
            const auto adv = [&](const D& k, double f) {
                const Vec3 dp = f * h * k.pdot;
                return std::tuple<Dcm, Vec3, Geodetic>(
                    Dcm(c + f * h * k.cdot), Vec3(v + f * h * k.vdot),
                    Geodetic{p.lon + dp(0), p.lat + dp(1), p.h + dp(2)});
            };
            const D k1 = deriv(0.0, c, v, p);
            auto [c2, v2, p2] = adv(k1, 0.5);
            const D k2 = deriv(0.5 * h, c2, v2, p2);
            auto [c3, v3, p3] = adv(k2, 0.5);
            const D k3 = deriv(0.5 * h, c3, v3, p3);
            auto [c4, v4, p4] = adv(k3, 1.0);
            const D k4 = deriv(h, c4, v4, p4);
            c += (h / 6.0) * (k1.cdot + 2.0 * k2.cdot + 2.0 * k3.cdot + k4.cdot);
            v += (h / 6.0) * (k1.vdot + 2.0 * k2.vdot + 2.0 * k3.vdot + k4.vdot);
            const Vec3 dp = (h / 6.0) * (k1.pdot + 2.0 * k2.pdot + 2.0 * k3.pdot + k4.pdot);
            p = {p.lon + dp(0), p.lat + dp(1), p.h + dp(2)};
            c = orthonormalize(c);
        }

        const Vec3 v_test = velocity_update(s, int_lin(w0, w1, 0, t / 2), int_lin(w0, w1, t / 2, t),
                                            int_lin(f0, f1, 0, t / 2), int_lin(f0, f1, t / 2, t),
                                            Vec3::Zero(), t);
        worst = std::max(worst, (v_test - v).norm());
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(PositionUpdate, BasicMoves) {
    const Geodetic p{0.5, 0.3, 10.0};
    const Geodetic p1 = position_update(p, Vec3::Zero(), Vec3::Zero(), 1.0);
    EXPECT_EQ(p1.lon, p.lon);
    EXPECT_EQ(p1.lat, p.lat);
    EXPECT_EQ(p1.h, p.h);

    const Geodetic p2 = position_update(p, Vec3(0, 1, 0), Vec3(0, 1, 0), 1.0);
    EXPECT_NEAR(p2.h, p.h + 1.0, 1e-12);
    EXPECT_EQ(p2.lat, p.lat);
}

TEST(PositionUpdate, NorthboundSmallArc) {
    Geodetic p{0.0, 0.0, 0.0};
    const Vec3 v(10.0, 0.0, 0.0);
    const double t = 0.02;
    for (int i = 0; i < 5000; ++i)
        p = position_update(p, v, v, t);
    const auto [re, rn] = radii(0.0);
    EXPECT_NEAR(p.lat, 1000.0 / rn, 1e-9);
}

TEST(LeverVelocityIntegral, Reductions) {
    NavState s = static_state(0.5, 0.0);
    const double t = 0.02;

    // constant v, zero rotation, zero lever: T * C_n^b v
    s.v_n = Vec3(5.0, 0.1, -2.0);
    const Vec3 r1 =
        lever_velocity_integral(s, Vec3::Zero(), Vec3::Zero(), s.v_n, s.v_n, Vec3::Zero(), t);
    EXPECT_TRUE(r1.isApprox(t * s.c_nb() * s.v_n, 1e-13));

    // zero v, pure body rotation: (dth1+dth2) x l dominates
    s.v_n = Vec3::Zero();
    const Vec3 d1(2e-3, -1e-3, 5e-4), d2(1e-3, 2e-3, -3e-4);
    const Vec3 l(1.0, 0.5, 0.8);
    const Vec3 r2 = lever_velocity_integral(s, d1, d2, s.v_n, s.v_n, l, t);
    const Vec3 dominant = (d1 + d2).cross(l);
    EXPECT_LT((r2 - dominant).norm(), 5e-3 * dominant.norm());
}

TEST(LeverVelocityIntegral, FineQuadratureOracle) {
    // mild motion: |v| <= 6 m/s, |w| <= 0.05 rad/s, T = 0.02 s
    std::mt19937_64 rng(31);
    const double t = 0.02;
    const Vec3 l(1.0, 0.5, 0.8);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const MotionStep s = oracles::random_mild_step(rng, t, 6.0, 0.05);
        const int n = 20; // 1 kHz
        const auto hist = oracles::propagate_frames(s, n);
        std::vector<Vec3> integrand(n + 1);
        for (int i = 0; i <= n; ++i) {
            const double tau = i * (t / n);
            const Dcm c_nb = oracles::c_nb_at(s, hist, i);
            integrand[i] = c_nb * s.vel(tau) + s.rate(tau).cross(l) - (c_nb * s.w_ie_n).cross(l);
        }
        const Vec3 ref = oracles::simpson_vec(integrand, t / n);

        NavState nav;
        nav.c_bn = s.c_bn0;
        nav.v_n = s.v0;
        nav.p = {0.0, std::asin(s.w_ie_n(1) / s.w_ie_n.norm()), 0.0};
        const Vec3 got = lever_velocity_integral(nav, s.dtheta(0, t / 2), s.dtheta(t / 2, t), s.v0,
                                                 s.v1, l, t);
        worst = std::max(worst, (got - ref).norm());
    }
    EXPECT_LT(worst, 1e-7);
}

TEST(PredictPulseCount, StationaryAndForwardArithmetic) {
    NavState s;
    s.p = {0.0, 0.6, 0.0};
    const Dcm c_bm = Dcm::Identity();

    EXPECT_EQ(predict_pulse_count(s, c_bm, 59.8, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
                                  Vec3::Zero(), Vec3::Zero(), 0.02),
              s.s);

    // pure forward 10 m/s, aligned frames, zero lever: 59.8 * 10 * 0.02
    s.v_n = Vec3(10.0, 0.0, 0.0);
    s.p = {0.0, 0.0, 0.0};
    const double ds = predict_pulse_count(s, c_bm, 59.8, Vec3::Zero(), Vec3::Zero(), s.v_n, s.v_n,
                                          Vec3::Zero(), 0.02);
    EXPECT_NEAR(ds, 11.96, 1e-10);
}

TEST(DcmIntegrals, ZeroRotationReductions) {
    NavState s = static_state(0.4, 0.0);
    const Vec3 v0(3.0, 0.0, 1.0), v1(3.5, 0.0, 1.2);
    const double t = 0.02;
    const auto ints = dcm_integrals(s, Vec3::Zero(), Vec3::Zero(), v0, v1, t);
    EXPECT_TRUE(ints.int_c_nb.isApprox(t * s.c_nb(), 1e-14));
    EXPECT_TRUE(ints.int_c_nb_vx.isApprox(0.5 * t * s.c_nb() * skew(v0 + v1), 1e-14));
}

TEST(DcmIntegrals, FineQuadratureOracle) {
    // paper-scale motion: |v| <= 25 m/s, |w| <= 0.15 rad/s
    std::mt19937_64 rng(37);
    const double t = 0.02;
    double worst_c = 0.0, worst_cv = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const MotionStep s = oracles::random_mild_step(rng, t, 25.0, 0.15);
        const int n = 20;
        const auto hist = oracles::propagate_frames(s, n);
        std::vector<Mat3> ic(n + 1), icv(n + 1);
        for (int i = 0; i <= n; ++i) {
            const double tau = i * (t / n);
            const Dcm c_nb = oracles::c_nb_at(s, hist, i);
            ic[i] = c_nb;
            icv[i] = c_nb * skew(s.vel(tau));
        }
        const Mat3 ref_c = oracles::simpson_mat(ic, t / n);
        const Mat3 ref_cv = oracles::simpson_mat(icv, t / n);

        NavState nav;
        nav.c_bn = s.c_bn0;
        nav.v_n = s.v0;
        const auto ints = dcm_integrals(nav, s.dtheta(0, t / 2), s.dtheta(t / 2, t), s.v0, s.v1, t);
        worst_c = std::max(
            worst_c, (ints.int_c_nb - ref_c).cwiseAbs().maxCoeff() / ref_c.cwiseAbs().maxCoeff());
        worst_cv = std::max(worst_cv, (ints.int_c_nb_vx - ref_cv).cwiseAbs().maxCoeff() /
                                          ref_cv.cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst_c, 1e-5);
    EXPECT_LT(worst_cv, 1e-5);
}

TEST(Invariants, ZeroInputFixedPointAndOrthonormality) {
    NavState s = static_state(0.6, 80.0);
    const double t = 0.02;
    const Geodetic p0 = s.p;

    for (int k = 0; k < 1000; ++k) {
        const Vec3 w_in = earth_rate_n(s.p.lat) + transport_rate(s.v_n, s.p);
        const Vec3 dth = s.c_nb() * earth_rate_n(s.p.lat) * (t / 2.0);
        const Vec3 dv = -s.c_nb() * gravity(s.p.lat, s.p.h) * (t / 2.0);
        const Vec3 v_new = velocity_update(s, dth, dth, dv, dv, Vec3::Zero(), t);
        s.c_bn = attitude_update(s.c_bn, dth, dth, w_in, t);
        s.p = position_update(s.p, s.v_n, v_new, t);
        s.v_n = v_new;
        ASSERT_LT((s.c_bn * s.c_bn.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_LT(s.v_n.norm(), 1e-6);
    const auto [re, rn] = radii(p0.lat);
    EXPECT_LT(std::abs(s.p.lat - p0.lat) * rn, 1e-6);
    EXPECT_LT(std::abs(s.p.lon - p0.lon) * re, 1e-6);
    EXPECT_LT(std::abs(s.p.h - p0.h), 1e-6);
}

TEST(Invariants, SchulerScaleBoundedGrowthUnderAccelBias) {
    // uncorrected 30 ug north accel bias for one hour: bounded oscillatory
    // envelope, well under 2 km
    NavState s;
    s.c_bn = Dcm::Identity();
    s.p = {0.0, 0.7, 0.0};
    const double t = 0.02;
    const Vec3 bias(30e-6 * 9.80665, 0.0, 0.0);
    const Geodetic p0 = s.p;
    const auto [re, rn] = radii(p0.lat);

    // sensor outputs come from the true (stationary, identity-attitude) body
    const Vec3 dth = earth_rate_n(p0.lat) * (t / 2.0);
    const Vec3 dv = (-gravity(p0.lat, p0.h) + bias) * (t / 2.0);

    double max_err = 0.0;
    for (int k = 0; k < 180000; ++k) {
        const Vec3 w_in = earth_rate_n(s.p.lat) + transport_rate(s.v_n, s.p);
        const Vec3 v_new = velocity_update(s, dth, dth, dv, dv, Vec3::Zero(), t);
        s.c_bn = attitude_update(s.c_bn, dth, dth, w_in, t);
        s.p = position_update(s.p, s.v_n, v_new, t);
        s.v_n = v_new;
        const double dn = (s.p.lat - p0.lat) * rn;
        max_err = std::max(max_err, std::abs(dn));
    }
    EXPECT_GT(max_err, 50.0);
    EXPECT_LT(max_err, 2000.0);
}
