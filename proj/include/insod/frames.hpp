#pragma once

// Earth model, geodesy and rotation algebra shared by the whole library.
//
// Frame conventions (used everywhere, never mixed):
//   navigation frame n : North - Up - East, components ordered [N, U, E]
//   vehicle frame    m : x forward, y up, z right
//   body frame       b : IMU axes, misaligned from m by mounting angles
// Geodetic position p = [lon, lat, h] (rad, rad, m).

#include <cmath>

#include <Eigen/Dense>

#include "insod/errors.hpp"

namespace insod {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Dcm = Eigen::Matrix3d;

struct Geodetic {
    double lon{0.0}; // rad, wrapped to (-pi, pi]
    double lat{0.0}; // rad, |lat| <= pi/2
    double h{0.0};   // m above ellipsoid

    Vec3 as_vec() const { return {lon, lat, h}; }
    static Geodetic from_vec(const Vec3& v) { return {v(0), v(1), v(2)}; }
};

// Reference ellipsoid plus normal-gravity coefficients (Somigliana form).
struct EarthModel {
    double a;        // semi-major axis, m
    double e2;       // first eccentricity squared
    double omega_ie; // earth rotation rate, rad/s
    double ge;       // normal gravity at the equator, m/s^2
    double gk;       // Somigliana constant k
    double gm;       // m = omega^2 a^2 b / GM, used in the height correction
    double f;        // flattening
};

inline const EarthModel& wgs84() {
    static const EarthModel m{6378137.0,
                              6.69437999014e-3,
                              7.292115e-5,
                              9.7803253359,
                              1.931852652458e-3,
                              3.449786506841e-3,
                              1.0 / 298.257223563};
    return m;
}

inline double deg(double x) { return x * M_PI / 180.0; }

inline Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
    return s;
}

// (R_E, R_N): transverse (prime-vertical) and meridian radii of curvature.
inline std::pair<double, double> radii(double lat, const EarthModel& em = wgs84()) {
    const double s = std::sin(lat);
    const double w2 = 1.0 - em.e2 * s * s;
    const double w = std::sqrt(w2);
    const double re = em.a / w;
    const double rn = em.a * (1.0 - em.e2) / (w2 * w);
    return {re, rn};
}

// d(R_E)/dlat and d(R_N)/dlat, needed by the position rows of the error model.
inline std::pair<double, double> radii_dlat(double lat, const EarthModel& em = wgs84()) {
    const double s = std::sin(lat);
    const double c = std::cos(lat);
    const double w2 = 1.0 - em.e2 * s * s;
    const double w = std::sqrt(w2);
    const double dre = em.a * em.e2 * s * c / (w2 * w);
    const double drn = 3.0 * em.a * (1.0 - em.e2) * em.e2 * s * c / (w2 * w2 * w);
    return {dre, drn};
}

// Local curvature matrix R_c mapping v^n to pdot = [lon_dot, lat_dot, h_dot].
// Nonzero pattern: (0,2) = 1/((R_E+h) cos L), (1,0) = 1/(R_N+h), (2,1) = 1.
inline Mat3 curvature_matrix(const Geodetic& p, const EarthModel& em = wgs84()) {
    const double cl = std::cos(p.lat);
    if (cl <= 1e-12)
        throw PolarSingularity("curvature matrix is singular at the poles");
    const auto [re, rn] = radii(p.lat, em);
    Mat3 rc = Mat3::Zero();
    rc(0, 2) = 1.0 / ((re + p.h) * cl);
    rc(1, 0) = 1.0 / (rn + p.h);
    rc(2, 1) = 1.0;
    return rc;
}

inline Vec3 earth_rate_n(double lat, const EarthModel& em = wgs84()) {
    return {em.omega_ie * std::cos(lat), em.omega_ie * std::sin(lat), 0.0};
}

// Rotation rate of the navigation frame w.r.t. the earth frame, N-U-E.
inline Vec3 transport_rate(const Vec3& v_n, const Geodetic& p, const EarthModel& em = wgs84()) {
    const double cl = std::cos(p.lat);
    if (cl <= 1e-12)
        throw PolarSingularity("transport rate is singular at the poles");
    const auto [re, rn] = radii(p.lat, em);
    const double tl = std::tan(p.lat);
    return {v_n(2) / (re + p.h), v_n(2) * tl / (re + p.h), -v_n(0) / (rn + p.h)};
}

// Elementary coordinate-transformation matrix about axis i (1-based).
inline Dcm elementary_rotation(int axis, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    Dcm m = Dcm::Identity();
    switch (axis) {
        case 1:
            m << 1, 0, 0, 0, c, s, 0, -s, c;
            break;
        case 2:
            m << c, 0, -s, 0, 1, 0, s, 0, c;
            break;
        case 3:
            m << c, s, 0, -s, c, 0, 0, 0, 1;
            break;
        default:
            throw std::invalid_argument("elementary_rotation: axis must be 1, 2 or 3");
    }
    return m;
}

// Body-to-vehicle mounting matrix, 2-3-1 sequence: M1(phi) * M3(theta) * M2(psi).
inline Dcm mount_dcm(double phi, double theta, double psi) {
    return elementary_rotation(1, phi) * elementary_rotation(3, theta) * elementary_rotation(2, psi);
}

// Derivatives dM2/dpsi and dM3/dtheta used by the mounting-angle Jacobians.
inline std::pair<Mat3, Mat3> d_mount(double theta, double psi) {
    const double cp = std::cos(psi), sp = std::sin(psi);
    const double ct = std::cos(theta), st = std::sin(theta);
    Mat3 dm2, dm3;
    dm2 << -sp, 0, -cp, 0, 0, 0, cp, 0, -sp;
    dm3 << -st, ct, 0, -ct, -st, 0, 0, 0, 0;
    return {dm2, dm3};
}

// Normal gravity magnitude with the standard height correction.
inline double gravity_magnitude(double lat, double h, const EarthModel& em = wgs84()) {
    const double s2 = std::sin(lat) * std::sin(lat);
    const double g0 = em.ge * (1.0 + em.gk * s2) / std::sqrt(1.0 - em.e2 * s2);
    const double hterm = 1.0 - (2.0 / em.a) * (1.0 + em.f + em.gm - 2.0 * em.f * s2) * h +
                         (3.0 / (em.a * em.a)) * h * h;
    return g0 * hterm;
}

// Gravity vector in N-U-E: points along -up.
inline Vec3 gravity(double lat, double h, const EarthModel& em = wgs84()) {
    return {0.0, -gravity_magnitude(lat, h, em), 0.0};
}

// d(omega_ie^n)/dp in the [lon, lat, h] ordering; only the latitude column is
// nonzero.
inline Mat3 earth_rate_jacobian(double lat, const EarthModel& em = wgs84()) {
    Mat3 d = Mat3::Zero();
    d(0, 1) = -em.omega_ie * std::sin(lat);
    d(1, 1) = em.omega_ie * std::cos(lat);
    return d;
}

// d(omega_en)/dv and d(omega_en)/dp at (v, p).
inline void transport_rate_jacobians(const Vec3& v, const Geodetic& p, const EarthModel& em,
                                     Mat3& jv, Mat3& jp) {
    const auto [re, rn] = radii(p.lat, em);
    const auto [dre, drn] = radii_dlat(p.lat, em);
    const double cl = std::cos(p.lat);
    const double tl = std::tan(p.lat);
    const double reh = re + p.h, rnh = rn + p.h;

    jv.setZero();
    jv(0, 2) = 1.0 / reh;
    jv(1, 2) = tl / reh;
    jv(2, 0) = -1.0 / rnh;

    jp.setZero();
    jp(0, 1) = -v(2) * dre / (reh * reh);
    jp(0, 2) = -v(2) / (reh * reh);
    jp(1, 1) = v(2) * (1.0 / (cl * cl * reh) - tl * dre / (reh * reh));
    jp(1, 2) = -v(2) * tl / (reh * reh);
    jp(2, 1) = v(0) * drn / (rnh * rnh);
    jp(2, 2) = v(0) / (rnh * rnh);
}

// (dg/dlat, dg/dh) of the normal-gravity magnitude.
inline std::pair<double, double> gravity_gradient(double lat, double h,
                                                  const EarthModel& em = wgs84()) {
    const double s = std::sin(lat), c = std::cos(lat);
    const double s2 = s * s;
    const double w2 = 1.0 - em.e2 * s2;
    const double w = std::sqrt(w2);
    const double g0 = em.ge * (1.0 + em.gk * s2) / w;
    const double dg0 = em.ge * (2.0 * em.gk * s * c / w + (1.0 + em.gk * s2) * em.e2 * s * c / (w2 * w));
    const double b = 1.0 + em.f + em.gm - 2.0 * em.f * s2;
    const double hf = 1.0 - (2.0 / em.a) * b * h + (3.0 / (em.a * em.a)) * h * h;
    const double dhf_dlat = (2.0 * h / em.a) * 4.0 * em.f * s * c;
    const double dhf_dh = -(2.0 / em.a) * b + 6.0 * h / (em.a * em.a);
    return {dg0 * hf + g0 * dhf_dlat, g0 * dhf_dh};
}

// Rodrigues formula. Exactly orthonormal up to rounding for any rotation vector.
inline Dcm rotvec_to_dcm(const Vec3& r) {
    const double angle = r.norm();
    if (angle < 1e-12) {
        const Mat3 s = skew(r);
        return Mat3::Identity() + s + 0.5 * s * s;
    }
    const Mat3 s = skew(r / angle);
    return Mat3::Identity() + std::sin(angle) * s + (1.0 - std::cos(angle)) * s * s;
}

// One-step symmetric re-orthonormalization; keeps ||C C^T - I|| at rounding level
// when the input is already close to orthonormal.
inline Dcm orthonormalize(const Dcm& c) {
    return c - 0.5 * c * (c.transpose() * c - Mat3::Identity());
}

inline double wrap_pi(double angle) {
    angle = std::fmod(angle + M_PI, 2.0 * M_PI);
    if (angle <= 0.0)
        angle += 2.0 * M_PI;
    return angle - M_PI;
}

} // namespace insod
