#pragma once

// Odometer measurement models: pulse accumulation (PA), pulse increment (PI),
// pulse velocity (PV), the nonholonomic constraint, their analytic Jacobians,
// and the constant-acceleration prefilter that turns raw pulse counts into a
// forward-velocity measurement.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "insod/errors.hpp"
#include "insod/frames.hpp"
#include "insod/strapdown.hpp"

namespace insod {

// Error-state ordering shared with the fusion module:
// [phi(0:3), dv(3:6), dp(6:9), dbg(9:12), dba(12:15), dK(15), dpsi(16),
//  dtheta(17), dl(18:21)] and, in PA mode, ds(21).
constexpr int kErrDim = 21;
constexpr int kAugDim = 22;
constexpr int kIdxPhi = 0;
constexpr int kIdxDv = 3;
constexpr int kIdxDp = 6;
constexpr int kIdxBg = 9;
constexpr int kIdxBa = 12;
constexpr int kIdxDk = 15;
constexpr int kIdxPsi = 16;
constexpr int kIdxTheta = 17;
constexpr int kIdxDl = 18;
constexpr int kIdxDs = 21;

using Row21 = Eigen::Matrix<double, 1, kErrDim>;
using Row22 = Eigen::Matrix<double, 1, kAugDim>;

struct MountParams {
    double k{1.0};      // odometer scale factor, pulses/m
    double psi{0.0};    // yaw mounting angle, rad
    double theta{0.0};  // pitch mounting angle, rad
    double phi{0.0};    // roll mounting angle, rad; held, never estimated
    Vec3 l_b{Vec3::Zero()}; // lever arm IMU -> vehicle origin, body frame, m

    Dcm c_bm() const { return mount_dcm(phi, theta, psi); }
};

enum class MeasKind { PulseAccumulation, PulseIncrement, PulseVelocity };

struct MeasConfig {
    double odo_std{1.0};             // pulses (PA/PI) or pulses/s (PV)
    double nhc_std{0.05};            // m/s
    double innovation_threshold{1.5};// raw pulses/s, PV gating
    double inflated_std{5.0};        // pulses/s used when gated
    bool pi_exact_jacobian{true};    // Eq-style exact window row vs summed rows
    int pi_window{50};               // steps per PI update window
};

// Angular velocity of the body w.r.t. the earth frame, from the bias-corrected
// gyro rate and the current attitude/latitude.
inline Vec3 omega_eb_b(const Vec3& w_ib_corrected, const Dcm& c_nb, const Vec3& w_ie_n) {
    return w_ib_corrected - c_nb * w_ie_n;
}

// Time rate of travelled distance in pulses/s.
inline double s_dot(const NavState& nav, const MountParams& mount, const Vec3& w_eb_b) {
    const Vec3 v_m = mount.c_bm() * (nav.c_nb() * nav.v_n + w_eb_b.cross(mount.l_b));
    return mount.k * v_m(0);
}

namespace detail {

// Shared row builder for the forward-rate and NHC Jacobians. `axis` selects
// the vehicle-frame component (0 forward, 1 up, 2 right); `scale` is K for the
// odometer row and 1 for the NHC rows; `with_dk` adds the dK column, which the
// NHC rows do not carry.
inline Row21 rate_jacobian_row(const NavState& nav, const MountParams& mount, const Vec3& w_eb_b,
                               int axis, double scale, bool with_dk, const EarthModel& em) {
    const Dcm c_nb = nav.c_nb();
    const Dcm c_bm = mount.c_bm();
    const Eigen::RowVector3d e = c_bm.row(axis);
    const Mat3 lx = skew(mount.l_b);
    const Vec3 w_ie_n = earth_rate_n(nav.p.lat, em);
    const Vec3 core = c_nb * nav.v_n + w_eb_b.cross(mount.l_b);

    Row21 row = Row21::Zero();
    row.segment<3>(kIdxPhi) = -scale * e * (c_nb * skew(nav.v_n) + lx * c_nb * skew(w_ie_n));
    row.segment<3>(kIdxDv) = scale * e * c_nb;
    row.segment<3>(kIdxDp) = scale * e * lx * c_nb * earth_rate_jacobian(nav.p.lat, em);
    // dbg column: the prediction uses bias-corrected rates, so with the
    // estimate-minus-truth state the lever sensitivity enters with +(l x).
    row.segment<3>(kIdxBg) = scale * e * lx;
    if (with_dk)
        row(kIdxDk) = (e * core)(0);

    const Dcm m1 = elementary_rotation(1, mount.phi);
    const Dcm m2 = elementary_rotation(2, mount.psi);
    const Dcm m3 = elementary_rotation(3, mount.theta);
    const auto [dm2, dm3] = d_mount(mount.theta, mount.psi);
    row(kIdxPsi) = scale * ((m1 * m3 * dm2).row(axis) * core)(0);
    row(kIdxTheta) = scale * ((m1 * dm3 * m2).row(axis) * core)(0);
    row.segment<3>(kIdxDl) = scale * e * skew(w_eb_b);
    return row;
}

} // namespace detail

// Jacobian of the pulse velocity (17) w.r.t. the 21 error states.
inline Row21 jac_sdot(const NavState& nav, const MountParams& mount, const Vec3& w_eb_b,
                      const EarthModel& em = wgs84()) {
    return detail::rate_jacobian_row(nav, mount, w_eb_b, 0, mount.k, true, em);
}

// Dynamics row of the augmented ds state: ds rate depends on the 21 base
// errors, never on ds itself.
inline Row22 delta_s_row(const NavState& nav, const MountParams& mount, const Vec3& w_eb_b,
                         const EarthModel& em = wgs84()) {
    Row22 row = Row22::Zero();
    row.head<kErrDim>() = jac_sdot(nav, mount, w_eb_b, em);
    return row;
}

// NHC: predicted vehicle-frame up/right velocities (measurement value is the
// zero 2-vector) and the 2 x 21 Jacobian. Rows carry no K factor and no dK
// sensitivity.
inline std::pair<Eigen::Vector2d, Eigen::Matrix<double, 2, kErrDim>>
nhc_value_and_jac(const NavState& nav, const MountParams& mount, const Vec3& w_eb_b,
                  const EarthModel& em = wgs84()) {
    const Vec3 v_m = mount.c_bm() * (nav.c_nb() * nav.v_n + w_eb_b.cross(mount.l_b));
    Eigen::Vector2d predicted(v_m(1), v_m(2));
    Eigen::Matrix<double, 2, kErrDim> h;
    h.row(0) = detail::rate_jacobian_row(nav, mount, w_eb_b, 1, 1.0, false, em);
    h.row(1) = detail::rate_jacobian_row(nav, mount, w_eb_b, 2, 1.0, false, em);
    return {predicted, h};
}

// One-step inputs shared by the integrated Jacobian and the pulse prediction.
struct ImuStep {
    Vec3 dth1, dth2; // bias-corrected angle increments, rad
    Vec3 v_k, v_k1;  // start/end-of-step velocity, m/s
    double t;        // step length, s
};

// Integrated Jacobian H_k = integral of M_k over one step, via the closed-form
// DCM integrals.
inline Row21 h_k_integrated(const NavState& nav, const MountParams& mount, const ImuStep& step,
                            const Vec3& w_eb_b, const EarthModel& em = wgs84()) {
    const Dcm c_bm = mount.c_bm();
    const Eigen::RowVector3d e = c_bm.row(0);
    const Mat3 lx = skew(mount.l_b);
    const Vec3 w_ie_n = earth_rate_n(nav.p.lat, em);
    const double k = mount.k;

    const DcmIntegrals ints = dcm_integrals(nav, step.dth1, step.dth2, step.v_k, step.v_k1, step.t);
    const Vec3 lvi =
        lever_velocity_integral(nav, step.dth1, step.dth2, step.v_k, step.v_k1, mount.l_b, step.t, em);

    Row21 row = Row21::Zero();
    row.segment<3>(kIdxPhi) = -k * e * (ints.int_c_nb_vx + lx * ints.int_c_nb * skew(w_ie_n));
    row.segment<3>(kIdxDv) = k * e * ints.int_c_nb;
    row.segment<3>(kIdxDp) = k * e * lx * ints.int_c_nb * earth_rate_jacobian(nav.p.lat, em);
    row.segment<3>(kIdxBg) = k * e * lx * step.t;
    row(kIdxDk) = (e * lvi)(0);

    const Dcm m1 = elementary_rotation(1, mount.phi);
    const Dcm m2 = elementary_rotation(2, mount.psi);
    const Dcm m3 = elementary_rotation(3, mount.theta);
    const auto [dm2, dm3] = d_mount(mount.theta, mount.psi);
    row(kIdxPsi) = k * ((m1 * m3 * dm2).row(0) * lvi)(0);
    row(kIdxTheta) = k * ((m1 * dm3 * m2).row(0) * lvi)(0);
    row.segment<3>(kIdxDl) = k * e * skew(w_eb_b) * step.t;
    return row;
}

// Per-step cache for the pulse-increment window.
struct PiWindow {
    std::vector<Row21> h_rows;               // integrated rows H_k, one per step
    std::vector<Row21> m_rows;               // instantaneous rows M_k at step start
    std::vector<Eigen::MatrixXd> phi_steps;  // 21x21 transition matrices per step
    double step_dt{0.0};

    void clear() {
        h_rows.clear();
        m_rows.clear();
        phi_steps.clear();
    }
    int size() const { return static_cast<int>(h_rows.size()); }
};

// Exact window row: (sum_k H_k Phi_{k|0}) Phi_{0|N}.
inline Row21 jac_increment_exact(const PiWindow& window) {
    if (window.size() < 1)
        throw WindowUnderflow("pulse-increment window needs at least one step");
    Eigen::MatrixXd phi_k0 = Eigen::MatrixXd::Identity(kErrDim, kErrDim);
    Row21 acc = Row21::Zero();
    for (int k = 0; k < window.size(); ++k) {
        acc += window.h_rows[k] * phi_k0;
        phi_k0 = window.phi_steps[k] * phi_k0;
    }
    // phi_k0 is now Phi_{N|0}; bring the row onto the end-of-window state.
    return acc * phi_k0.inverse();
}

// Mild-motion approximation: sum of the instantaneous rows times T.
inline Row21 jac_increment_approx(const std::vector<Row21>& m_rows, double t) {
    if (m_rows.empty())
        throw WindowUnderflow("pulse-increment window needs at least one step");
    Row21 acc = Row21::Zero();
    for (const auto& row : m_rows)
        acc += row;
    return acc * t;
}

// --- pulse-velocity prefilter -------------------------------------------------

// Constant-acceleration model over [s, s_dot, s_ddot] driven by white jerk
// noise, measuring the accumulated count with the quantization variance 1/12.
struct PulseVelKf {
    Eigen::Vector3d x{Eigen::Vector3d::Zero()};
    Eigen::Matrix3d p{Eigen::Matrix3d::Zero()};
    double q_jerk{1e4};      // (pulses/s^3)^2 * s
    double r_meas{1.0 / 12.0}; // pulses^2

    static PulseVelKf init(double n0, double q_jerk = 1e4) {
        PulseVelKf kf;
        kf.x << n0, 0.0, 0.0;
        kf.p = Eigen::Vector3d(1.0, 1e4, 1e4).asDiagonal();
        kf.q_jerk = q_jerk;
        return kf;
    }
    double s_dot_hat() const { return x(1); }
};

inline double pv_prefilter_step(PulseVelKf& kf, double n_k, double t) {
    if (!(t > 0.0))
        throw std::invalid_argument("pv_prefilter_step: nonpositive interval");
    Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
    f(0, 1) = t;
    f(0, 2) = 0.5 * t * t;
    f(1, 2) = t;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    Eigen::Matrix3d q;
    q << t5 / 20.0, t4 / 8.0, t3 / 6.0, t4 / 8.0, t3 / 3.0, t2 / 2.0, t3 / 6.0, t2 / 2.0, t;
    q *= kf.q_jerk;

    kf.x = f * kf.x;
    kf.p = f * kf.p * f.transpose() + q;

    const double s = kf.p(0, 0) + kf.r_meas;
    if (!(s > 0.0) || !std::isfinite(s))
        throw CovarianceNotPD("pulse-velocity prefilter covariance broke down");
    const Eigen::Vector3d gain = kf.p.col(0) / s;
    kf.x += gain * (n_k - kf.x(0));
    Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity();
    ikh.col(0) -= gain;
    kf.p = ikh * kf.p * ikh.transpose() + gain * kf.r_meas * gain.transpose();
    kf.p = 0.5 * (kf.p + kf.p.transpose());
    if (!(kf.p(0, 0) > 0.0) || !(kf.p(1, 1) > 0.0) || !(kf.p(2, 2) > 0.0))
        throw CovarianceNotPD("pulse-velocity prefilter covariance broke down");
    return kf.s_dot_hat();
}

// Differenced pulse velocity, kept as the contrast baseline only.
inline double naive_pulse_velocity(double dn, double t) {
    if (!(t > 0.0))
        throw std::invalid_argument("naive_pulse_velocity: nonpositive interval");
    return dn / t;
}

// --- measurement bundle -------------------------------------------------------

// Kind-specific sensor payload for one update instant.
struct MeasInputs {
    std::optional<double> n_accum;   // PA: accumulated count (possibly noise-injected)
    std::optional<double> dn_window; // PI: count gained over the window
    std::optional<double> sdot_hat;  // PV: prefiltered forward rate, pulses/s
    const PiWindow* window{nullptr}; // PI: cached per-step rows/transitions
    double s_window_start{0.0};      // PI: nav.s at the window start
    Vec3 w_eb_b{Vec3::Zero()};
};

struct MeasBundle {
    Eigen::VectorXd z;
    Eigen::VectorXd zhat;
    Eigen::MatrixXd h; // n_rows x 21 (or x 22 in PA mode)
    Eigen::MatrixXd r;
};

inline MeasBundle measurement_bundle(MeasKind kind, const NavState& nav, const MountParams& mount,
                                     const MeasInputs& in, const MeasConfig& cfg,
                                     const EarthModel& em = wgs84()) {
    const auto [nhc_pred, nhc_jac] = nhc_value_and_jac(nav, mount, in.w_eb_b, em);

    MeasBundle out;
    out.z.resize(3);
    out.zhat.resize(3);
    out.r = Eigen::MatrixXd::Zero(3, 3);
    out.r(0, 0) = cfg.odo_std * cfg.odo_std;
    out.r(1, 1) = cfg.nhc_std * cfg.nhc_std;
    out.r(2, 2) = cfg.nhc_std * cfg.nhc_std;
    out.z.tail<2>().setZero();
    out.zhat.tail<2>() = nhc_pred;

    switch (kind) {
        case MeasKind::PulseAccumulation: {
            if (!in.n_accum)
                throw KindMismatch("pulse-accumulation update needs the accumulated count");
            out.z(0) = *in.n_accum;
            out.zhat(0) = nav.s;
            out.h = Eigen::MatrixXd::Zero(3, kAugDim);
            out.h(0, kIdxDs) = 1.0;
            out.h.block(1, 0, 2, kErrDim) = nhc_jac;
            break;
        }
        case MeasKind::PulseIncrement: {
            if (!in.dn_window || in.window == nullptr)
                throw KindMismatch("pulse-increment update needs the window increment and cache");
            out.z(0) = *in.dn_window;
            out.zhat(0) = nav.s - in.s_window_start;
            out.h = Eigen::MatrixXd::Zero(3, kErrDim);
            out.h.row(0) = cfg.pi_exact_jacobian
                               ? jac_increment_exact(*in.window)
                               : jac_increment_approx(in.window->m_rows, in.window->step_dt);
            out.h.block(1, 0, 2, kErrDim) = nhc_jac;
            break;
        }
        case MeasKind::PulseVelocity: {
            if (!in.sdot_hat)
                throw KindMismatch("pulse-velocity update needs the prefiltered rate");
            out.z(0) = *in.sdot_hat;
            out.zhat(0) = s_dot(nav, mount, in.w_eb_b);
            out.h = Eigen::MatrixXd::Zero(3, kErrDim);
            out.h.row(0) = jac_sdot(nav, mount, in.w_eb_b, em);
            out.h.block(1, 0, 2, kErrDim) = nhc_jac;
            break;
        }
    }
    return out;
}

} // namespace insod
