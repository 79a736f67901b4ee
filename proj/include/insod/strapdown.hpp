#pragma once

// Strapdown mechanization: 2-sample attitude/velocity updates, trapezoidal
// position integration, and the closed-form step integrals consumed by the
// odometer measurement predictions.

#include <Eigen/Dense>

#include "insod/frames.hpp"

namespace insod {

struct NavState {
    Dcm c_bn{Dcm::Identity()}; // body-to-navigation attitude
    Vec3 v_n{Vec3::Zero()};    // velocity w.r.t. earth, N-U-E, m/s
    Geodetic p{};              // lon/lat/h
    double s{0.0};             // predicted accumulated odometer count, pulses

    Dcm c_nb() const { return c_bn.transpose(); }
};

// Linear rate model over one step: w(t) = a_w * (t - t_k) + b_w, fitted to the
// two gyro sub-interval increments.
struct ConingCoeffs {
    Vec3 a_w; // rad/s^2
    Vec3 b_w; // rad/s
};

inline ConingCoeffs coning_coeffs(const Vec3& dth1, const Vec3& dth2, double t) {
    return {4.0 * (dth2 - dth1) / (t * t), (3.0 * dth1 - dth2) / t};
}

// 2-sample attitude update. Body rotation uses the classic coning correction,
// the navigation-frame rotation over the step uses w_in^n held at its start-of-
// step value. Output is re-orthonormalized.
inline Dcm attitude_update(const Dcm& c_bn, const Vec3& dth1, const Vec3& dth2,
                           const Vec3& w_in_n, double t) {
    const Vec3 phi_b = dth1 + dth2 + (2.0 / 3.0) * dth1.cross(dth2);
    const Vec3 zeta = w_in_n * t;
    const Dcm c_new = rotvec_to_dcm(-zeta) * c_bn * rotvec_to_dcm(phi_b);
    return orthonormalize(c_new);
}

// 2-sample velocity update with sculling compensation. Coriolis/gravity terms
// are evaluated at an extrapolated mid-step position and at the mid-step
// velocity via one fixed-point pass.
inline Vec3 velocity_update(const NavState& state, const Vec3& dth1, const Vec3& dth2,
                            const Vec3& dv1, const Vec3& dv2, const Vec3& b_a, double t,
                            const EarthModel& em = wgs84()) {
    const Vec3 dth = dth1 + dth2;
    const Vec3 dv1c = dv1 - b_a * (t / 2.0);
    const Vec3 dv2c = dv2 - b_a * (t / 2.0);
    const Vec3 dv = dv1c + dv2c;

    // rotation + sculling terms in the start-of-step body frame
    Vec3 dv_sf_b =
        dv + 0.5 * dth.cross(dv) + (2.0 / 3.0) * (dth1.cross(dv2c) + dv1c.cross(dth2));

    // residual of the linear-rate/linear-force step model beyond the first-order
    // rotation already carried by the rot/scull terms; matters at turn-rate
    // angular speeds
    {
        const ConingCoeffs cw = coning_coeffs(dth1, dth2, t);
        const Vec3 a_f = 4.0 * (dv2c - dv1c) / (t * t);
        const Vec3 b_f = (3.0 * dv1c - dv2c) / t;
        const auto integrand = [&](double tau) {
            const Vec3 beta = cw.b_w * tau + 0.5 * cw.a_w * tau * tau;
            // rotation vector including the second-order non-commutativity of
            // the linear rate model
            const Vec3 rv = beta + (tau * tau * tau / 12.0) * cw.b_w.cross(cw.a_w);
            const Vec3 fb = b_f + a_f * tau;
            return Vec3(rotvec_to_dcm(rv) * fb - fb - beta.cross(fb));
        };
        const double h = t / 4.0;
        dv_sf_b += (h / 3.0) * (integrand(0.0) + 4.0 * integrand(h) + 2.0 * integrand(2 * h) +
                                4.0 * integrand(3 * h) + integrand(t));
    }

    // mid-step position extrapolation for the gravity/Coriolis evaluation
    Geodetic p_mid = state.p;
    {
        const Vec3 pdot = curvature_matrix(state.p, em) * state.v_n;
        p_mid.lon += pdot(0) * t / 2.0;
        p_mid.lat += pdot(1) * t / 2.0;
        p_mid.h += pdot(2) * t / 2.0;
    }
    const Vec3 w_ie = earth_rate_n(p_mid.lat, em);
    const Vec3 g_n = gravity(p_mid.lat, p_mid.h, em);

    const Vec3 w_in = w_ie + transport_rate(state.v_n, p_mid, em);
    const Vec3 dv_sf_n = (Mat3::Identity() - 0.5 * skew(w_in * t)) * state.c_bn * dv_sf_b;

    Vec3 v_new = state.v_n;
    for (int iter = 0; iter < 2; ++iter) {
        const Vec3 v_mid = 0.5 * (state.v_n + v_new);
        const Vec3 w_en_mid = transport_rate(v_mid, p_mid, em);
        const Vec3 dv_cor = t * (g_n - (2.0 * w_ie + w_en_mid).cross(v_mid));
        v_new = state.v_n + dv_sf_n + dv_cor;
    }
    return v_new;
}

// Trapezoidal integration of pdot = R_c v^n.
inline Geodetic position_update(const Geodetic& p, const Vec3& v_old, const Vec3& v_new,
                                double t, const EarthModel& em = wgs84()) {
    const Vec3 pdot0 = curvature_matrix(p, em) * v_old;
    Geodetic p_pred{p.lon + pdot0(0) * t, p.lat + pdot0(1) * t, p.h + pdot0(2) * t};
    const Vec3 pdot1 = curvature_matrix(p_pred, em) * v_new;
    const Vec3 d = 0.5 * t * (pdot0 + pdot1);
    return {wrap_pi(p.lon + d(0)), p.lat + d(1), p.h + d(2)};
}

// Closed-form step integral of C_n^b(t) v^n(t) + w_eb^b(t) x l^b over [t_k, t_k+T],
// resolved in the body frame at t_k. Velocity is assumed linear inside the step;
// terms of order w_in*w_ie and |dth|^2 are dropped.
inline Vec3 lever_velocity_integral(const NavState& state, const Vec3& dth1, const Vec3& dth2,
                                    const Vec3& v_k, const Vec3& v_k1, const Vec3& l_b, double t,
                                    const EarthModel& em = wgs84()) {
    const Dcm c_nb = state.c_nb();
    const Vec3 cv_k = c_nb * v_k;
    const Vec3 cv_k1 = c_nb * v_k1;
    const Vec3 cw_ie = c_nb * earth_rate_n(state.p.lat, em);

    Vec3 out = 0.5 * t * (cv_k + cv_k1);
    out += (dth1 + dth2).cross(l_b);
    out -= (t / 3.0) * dth1.cross(cv_k);
    out -= (t / 6.0) * (3.0 * dth1 + dth2).cross(cv_k1);
    out -= t * cw_ie.cross(l_b);
    out -= (t / 6.0) * (5.0 * dth1 + dth2).cross(cw_ie.cross(l_b));
    return out;
}

// Predicted pulse-count increment over one step: K e1^T C_b^m * integral.
inline double pulse_count_increment(const NavState& state, const Dcm& c_bm, double k_scale,
                                    const Vec3& dth1, const Vec3& dth2, const Vec3& v_k,
                                    const Vec3& v_k1, const Vec3& l_b, double t,
                                    const EarthModel& em = wgs84()) {
    const Vec3 integral = lever_velocity_integral(state, dth1, dth2, v_k, v_k1, l_b, t, em);
    return k_scale * (c_bm.row(0) * integral)(0);
}

inline double predict_pulse_count(const NavState& state, const Dcm& c_bm, double k_scale,
                                  const Vec3& dth1, const Vec3& dth2, const Vec3& v_k,
                                  const Vec3& v_k1, const Vec3& l_b, double t,
                                  const EarthModel& em = wgs84()) {
    return state.s + pulse_count_increment(state, c_bm, k_scale, dth1, dth2, v_k, v_k1, l_b, t, em);
}

// Step integrals of C_n^b dt and C_n^b (v x) dt, first order in the angular
// increments, anchored at t_k.
struct DcmIntegrals {
    Mat3 int_c_nb;      // integral of C_n^b(t) dt
    Mat3 int_c_nb_vx;   // integral of C_n^b(t) (v^n(t) x) dt
};

inline DcmIntegrals dcm_integrals(const NavState& state, const Vec3& dth1, const Vec3& dth2,
                                  const Vec3& v_k, const Vec3& v_k1, double t) {
    const Dcm c_nb = state.c_nb();
    const Mat3 beta_int = skew((t / 6.0) * (5.0 * dth1 + dth2));

    DcmIntegrals out;
    out.int_c_nb = t * c_nb - beta_int * c_nb;

    out.int_c_nb_vx = 0.5 * t * c_nb * skew(v_k + v_k1);
    out.int_c_nb_vx -= (t / 3.0) * skew(dth1) * c_nb * skew(v_k);
    out.int_c_nb_vx -= (t / 6.0) * skew(3.0 * dth1 + dth2) * c_nb * skew(v_k1);
    return out;
}

} // namespace insod
