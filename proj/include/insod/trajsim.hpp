#pragma once

// Ground-truth trajectory synthesis, IMU/odometer sensor simulation, and the
// Monte-Carlo statistics used to verify the pulse-error lemmas.
//
// The vehicle's speed u(t) and heading chi(t) are closed-form per segment. The
// vehicle stays level; the odometer wheel sits at the vehicle origin O_m and
// the IMU at O_b = O_m - C_b^n l^b. The navigation state (p, v) tracks the IMU
// point, the travelled distance d tracks the wheel.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "insod/errors.hpp"
#include "insod/frames.hpp"

namespace insod {

struct SegmentSpec {
    enum class Kind { Still, ConstSpeed, ConstAccel, SineAccel, Turn };
    Kind kind{Kind::Still};
    double duration{0.0};   // s
    double speed{0.0};      // ConstSpeed: held speed; SineAccel: target speed, m/s
    double accel{0.0};      // ConstAccel: rate, m/s^2
    double turn_angle{0.0}; // Turn: total heading change, rad (sin^2 rate shape)

    static SegmentSpec still(double dur) { return {Kind::Still, dur, 0, 0, 0}; }
    static SegmentSpec const_speed(double dur, double u) { return {Kind::ConstSpeed, dur, u, 0, 0}; }
    static SegmentSpec const_accel(double dur, double a) { return {Kind::ConstAccel, dur, 0, a, 0}; }
    static SegmentSpec sine_accel(double dur, double target) { return {Kind::SineAccel, dur, target, 0, 0}; }
    static SegmentSpec turn(double dur, double angle) { return {Kind::Turn, dur, 0, 0, angle}; }
};

struct TruthSample {
    double t{0.0};
    Geodetic p{};          // IMU position
    Vec3 v_n{Vec3::Zero()};    // IMU velocity, N-U-E
    Dcm c_bn{Dcm::Identity()}; // IMU attitude
    Vec3 w_ib_b{Vec3::Zero()}; // true body rate
    Vec3 f_b{Vec3::Zero()};    // true specific force
    double d{0.0};             // wheel travelled distance, m
};

struct SensorSpec {
    Vec3 gyro_bias{Vec3::Zero()};  // rad/s
    double arw{0.0};               // rad/sqrt(s)
    Vec3 accel_bias{Vec3::Zero()}; // m/s^2
    double accel_nd{0.0};          // (m/s^2)/sqrt(Hz)
    double k{59.8};                // pulses/m
    double psi{0.0}, theta{0.0}, phi{0.0}; // mounting angles, rad
    Vec3 lever{Vec3::Zero()};      // l^b, m
    double delta_p0{0.0};          // initial round-off, pulses, in [0,1)
    double imu_dt{0.02};           // s

    Dcm c_bm() const { return mount_dcm(phi, theta, psi); }
};

// Sensor grades of the simulated navigation-grade unit.
inline SensorSpec default_sensor_spec() {
    SensorSpec s;
    s.gyro_bias = Vec3::Constant(deg(0.005) / 3600.0);       // 0.005 deg/h
    s.arw = deg(0.001) / 60.0;                               // 0.001 deg/sqrt(h)
    s.accel_bias = Vec3::Constant(30e-6 * 9.80665);          // 30 ug
    s.accel_nd = 5e-6 * 9.80665;                             // 5 ug/sqrt(Hz)
    s.k = 59.8;
    s.psi = deg(3.0);
    s.theta = deg(2.0);
    s.phi = 0.0;
    s.lever = Vec3(1.0, 0.5, 0.8);
    s.delta_p0 = 0.0;
    s.imu_dt = 0.02;
    return s;
}

struct ImuSample {
    double t{0.0};                 // start of the step; increments cover [t, t+T]
    Vec3 dth1{Vec3::Zero()}, dth2{Vec3::Zero()}; // rad
    Vec3 dv1{Vec3::Zero()}, dv2{Vec3::Zero()};   // m/s
};

struct OdoSample {
    double t{0.0};
    long long n{0}; // accumulated pulse count
};

struct NoiseWindow {
    double start{0.0}, end{0.0}, std{0.0};
};

struct NoiseSchedule {
    std::vector<NoiseWindow> windows;

    void validate() const {
        double prev_end = -1e300;
        for (const auto& w : windows) {
            if (!(w.end > w.start) || w.std < 0.0 || w.start < prev_end)
                throw InvalidConfig("noise schedule windows must be ordered and non-overlapping");
            prev_end = w.end;
        }
    }
    double std_at(double t) const {
        for (const auto& w : windows)
            if (t >= w.start && t < w.end)
                return w.std;
        return 0.0;
    }
    bool empty() const { return windows.empty(); }
};

// --- speed/heading profile ----------------------------------------------------

namespace detail {

struct SegmentNode {
    SegmentSpec seg;
    double t0, u0, d0, chi0;
};

struct ProfileEval {
    double u, udot, chi, chidot, chiddot, d;
};

class Profile {
public:
    Profile(const std::vector<SegmentSpec>& segments, double heading0) {
        double t = 0.0, d = 0.0, chi = heading0;
        double u = initial_speed(segments);
        for (const auto& seg : segments) {
            if (!(seg.duration > 0.0))
                throw InvalidSegment("segment duration must be positive");
            nodes_.push_back({seg, t, u, d, chi});
            const auto end = eval_local(nodes_.back(), seg.duration);
            if (end.u < -1e-12 || u < -1e-12)
                throw InvalidSegment("negative speed requested");
            validate(nodes_.back());
            t += seg.duration;
            u = end.u;
            d = end.d;
            chi = end.chi;
        }
        total_ = t;
    }

    double total_duration() const { return total_; }
    double final_distance() const {
        const auto& n = nodes_.back();
        return eval_local(n, n.seg.duration).d;
    }

    ProfileEval eval(double t) const {
        if (t <= 0.0)
            return eval_local(nodes_.front(), 0.0);
        if (t >= total_)
            return eval_local(nodes_.back(), nodes_.back().seg.duration);
        size_t lo = 0, hi = nodes_.size();
        while (hi - lo > 1) {
            const size_t mid = (lo + hi) / 2;
            if (nodes_[mid].t0 <= t)
                lo = mid;
            else
                hi = mid;
        }
        return eval_local(nodes_[lo], t - nodes_[lo].t0);
    }

private:
    static double initial_speed(const std::vector<SegmentSpec>& segments) {
        if (segments.empty())
            throw InvalidSegment("empty segment list");
        const auto& s = segments.front();
        if (s.kind == SegmentSpec::Kind::ConstSpeed || s.kind == SegmentSpec::Kind::Turn)
            return s.speed > 0.0 ? s.speed : (s.kind == SegmentSpec::Kind::ConstSpeed ? s.speed : 0.0);
        return 0.0;
    }

    void validate(const SegmentNode& n) const {
        using K = SegmentSpec::Kind;
        switch (n.seg.kind) {
            case K::Still:
                if (std::abs(n.u0) > 1e-9)
                    throw InvalidSegment("still segment requires zero incoming speed");
                break;
            case K::ConstSpeed:
                if (n.seg.speed < 0.0)
                    throw InvalidSegment("negative speed requested");
                if (n.t0 > 0.0 && std::abs(n.seg.speed - n.u0) > 1e-9)
                    throw InvalidSegment("const_speed segment discontinuous with incoming speed");
                break;
            case K::SineAccel:
                if (n.seg.speed < 0.0)
                    throw InvalidSegment("negative speed requested");
                break;
            case K::ConstAccel:
                if (n.u0 + n.seg.accel * n.seg.duration < -1e-12)
                    throw InvalidSegment("const_accel segment drives the speed negative");
                break;
            case K::Turn:
                break;
        }
    }

    static ProfileEval eval_local(const SegmentNode& n, double tau) {
        using K = SegmentSpec::Kind;
        ProfileEval e{n.u0, 0.0, n.chi0, 0.0, 0.0, n.d0};
        const double dur = n.seg.duration;
        switch (n.seg.kind) {
            case K::Still:
                e.u = 0.0;
                break;
            case K::ConstSpeed:
                e.u = n.t0 == 0.0 ? n.seg.speed : n.u0;
                e.d = n.d0 + e.u * tau;
                break;
            case K::ConstAccel:
                e.u = n.u0 + n.seg.accel * tau;
                e.udot = n.seg.accel;
                e.d = n.d0 + n.u0 * tau + 0.5 * n.seg.accel * tau * tau;
                break;
            case K::SineAccel: {
                // half-sine acceleration from u0 to the target speed
                const double dv = n.seg.speed - n.u0;
                const double w = M_PI / dur;
                e.u = n.u0 + 0.5 * dv * (1.0 - std::cos(w * tau));
                e.udot = 0.5 * dv * w * std::sin(w * tau);
                e.d = n.d0 + n.u0 * tau + 0.5 * dv * (tau - std::sin(w * tau) / w);
                break;
            }
            case K::Turn: {
                // sin^2 heading-rate shape: zero rate and bounded rate-derivative
                // at both ends, peak rate 2*angle/duration
                const double a = n.seg.turn_angle;
                const double w = 2.0 * M_PI / dur;
                e.u = n.u0;
                e.d = n.d0 + n.u0 * tau;
                e.chi = n.chi0 + a * (tau / dur - std::sin(w * tau) / (w * dur));
                e.chidot = (2.0 * a / dur) * 0.5 * (1.0 - std::cos(w * tau));
                e.chiddot = (a / dur) * w * std::sin(w * tau);
                break;
            }
        }
        return e;
    }

    std::vector<SegmentNode> nodes_;
    double total_{0.0};
};

// Full rigid-body kinematics of the IMU point for one profile evaluation.
struct Kinematics {
    Vec3 v_m_n, v_b_n;
    Dcm c_bn;
    Vec3 w_ib_b, w_nb_b, w_in_n, f_b;
};

inline Kinematics kinematics_at(const ProfileEval& e, const Geodetic& p, const Dcm& c_bm,
                                const Vec3& lever, const EarthModel& em) {
    Kinematics k;
    const double c = std::cos(e.chi), s = std::sin(e.chi);
    const Vec3 fwd(c, 0.0, s);
    const Vec3 right(-s, 0.0, c);
    Dcm c_mn;
    c_mn.col(0) = fwd;
    c_mn.col(1) = Vec3(0, 1, 0);
    c_mn.col(2) = right;

    k.v_m_n = e.u * fwd;
    k.c_bn = c_mn * c_bm;
    const Dcm c_nb = k.c_bn.transpose();
    const Dcm c_mb = c_bm.transpose();
    const Dcm c_nm = c_mn.transpose();

    const Vec3 w_ie = earth_rate_n(p.lat, em);
    const Vec3 w_nm_m(0.0, -e.chidot, 0.0);

    // two passes: omega_en depends on the IMU velocity which depends on omega_eb
    Vec3 v_b = k.v_m_n;
    Vec3 w_en, w_eb_b;
    for (int pass = 0; pass < 2; ++pass) {
        w_en = transport_rate(v_b, p, em);
        const Vec3 w_em_m = c_nm * w_en + w_nm_m;
        w_eb_b = c_mb * w_em_m;
        v_b = k.v_m_n - k.c_bn * w_eb_b.cross(lever);
    }
    k.v_b_n = v_b;
    k.w_in_n = w_ie + w_en;
    k.w_ib_b = w_eb_b + c_nb * w_ie;
    k.w_nb_b = k.w_ib_b - c_nb * k.w_in_n;

    // specific force at the IMU point
    const Vec3 vdot_m = e.udot * fwd + e.u * e.chidot * right;
    Mat3 jv, jp;
    transport_rate_jacobians(v_b, p, em, jv, jp);
    const Vec3 w_en_dot = jv * vdot_m + jp * (curvature_matrix(p, em) * v_b);
    const Vec3 w_em_m_dot =
        -w_nm_m.cross(c_nm * w_en) + c_nm * w_en_dot + Vec3(0.0, -e.chiddot, 0.0);
    const Vec3 w_eb_b_dot = c_mb * w_em_m_dot;
    const Vec3 vdot_b = vdot_m - k.c_bn * (k.w_nb_b.cross(w_eb_b.cross(lever))) -
                        k.c_bn * (w_eb_b_dot.cross(lever));
    const Vec3 f_n = vdot_b + (2.0 * w_ie + w_en).cross(v_b) - gravity(p.lat, p.h, em);
    k.f_b = c_nb * f_n;
    return k;
}

} // namespace detail

// Ground-truth synthesis: samples at t = 0, dt, 2dt, ... covering all segments.
// Position integrates pdot = R_c v with classic RK4 on the sample grid.
inline std::vector<TruthSample> build_trajectory(const std::vector<SegmentSpec>& segments,
                                                 const Geodetic& origin, double heading0, double dt,
                                                 const SensorSpec& spec,
                                                 const EarthModel& em = wgs84()) {
    if (!(dt > 0.0))
        throw InvalidSegment("sample interval must be positive");
    const detail::Profile profile(segments, heading0);
    const Dcm c_bm = spec.c_bm();

    const auto v_of = [&](double t, const Geodetic& p) -> Vec3 {
        return detail::kinematics_at(profile.eval(t), p, c_bm, spec.lever, em).v_b_n;
    };
    const auto pdot = [&](double t, const Geodetic& p) -> Vec3 {
        return curvature_matrix(p, em) * v_of(t, p);
    };

    const long n_steps = std::lround(profile.total_duration() / dt);
    std::vector<TruthSample> out;
    out.reserve(n_steps + 1);

    Geodetic p = origin;
    for (long i = 0; i <= n_steps; ++i) {
        const double t = i * dt;
        const auto e = profile.eval(t);
        const auto kin = detail::kinematics_at(e, p, c_bm, spec.lever, em);
        TruthSample s;
        s.t = t;
        s.p = p;
        s.v_n = kin.v_b_n;
        s.c_bn = kin.c_bn;
        s.w_ib_b = kin.w_ib_b;
        s.f_b = kin.f_b;
        s.d = e.d;
        out.push_back(s);

        if (i < n_steps) {
            const Vec3 k1 = pdot(t, p);
            const auto step = [&](const Vec3& k, double f) {
                return Geodetic{p.lon + f * dt * k(0), p.lat + f * dt * k(1), p.h + f * dt * k(2)};
            };
            const Vec3 k2 = pdot(t + 0.5 * dt, step(k1, 0.5));
            const Vec3 k3 = pdot(t + 0.5 * dt, step(k2, 0.5));
            const Vec3 k4 = pdot(t + dt, step(k3, 1.0));
            const Vec3 dp = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            p = {wrap_pi(p.lon + dp(0)), p.lat + dp(1), p.h + dp(2)};
        }
    }
    return out;
}

// The 5000 s reference run: 120 s speed periods (holds at 0-10, 20-80 and
// 90-120 s, half-sine transitions at 10-20 and 80-90 s), five 90-degree turns
// inside the fast holds, and a long straight tail.
inline std::vector<SegmentSpec> default_paper_trajectory() {
    constexpr double kLow = 8.0;   // m/s
    constexpr double kHigh = 20.0; // m/s
    const std::array<int, 5> turn_periods{5, 12, 19, 26, 33};
    std::vector<SegmentSpec> segs;
    for (int period = 0; period < 41; ++period) {
        segs.push_back(SegmentSpec::const_speed(10.0, kLow));
        segs.push_back(SegmentSpec::sine_accel(10.0, kHigh));
        bool has_turn = false;
        int turn_index = 0;
        for (size_t j = 0; j < turn_periods.size(); ++j)
            if (turn_periods[j] == period) {
                has_turn = true;
                turn_index = static_cast<int>(j);
            }
        if (has_turn) {
            const double sign = (turn_index % 2 == 0) ? 1.0 : -1.0;
            segs.push_back(SegmentSpec::const_speed(10.0, kHigh));
            segs.push_back(SegmentSpec::turn(20.0, sign * M_PI / 2.0));
            segs.push_back(SegmentSpec::const_speed(30.0, kHigh));
        } else {
            segs.push_back(SegmentSpec::const_speed(60.0, kHigh));
        }
        segs.push_back(SegmentSpec::sine_accel(10.0, kLow));
        segs.push_back(SegmentSpec::const_speed(30.0, kLow));
    }
    // trailing 80 s to reach 5000 s, ending on the fast straight
    segs.push_back(SegmentSpec::const_speed(10.0, kLow));
    segs.push_back(SegmentSpec::sine_accel(10.0, kHigh));
    segs.push_back(SegmentSpec::const_speed(60.0, kHigh));
    return segs;
}

inline Geodetic default_origin() { return {deg(116.344), deg(39.981), 50.0}; }

// --- IMU synthesis --------------------------------------------------------------

// Two-sub-sample increments from the truth grid. The specific-force integral is
// evaluated by parts,
//   int C_n^b vdot dt = [C_n^b v] + int (w_nb x) C_n^b v dt,
// so only smooth, closed-form quantities are quadrated. Truth must be sampled
// at dt = T/2 (3-point rules) or at an even fraction of T/2 (composite Simpson).
inline std::vector<ImuSample> imu_from_truth(const std::vector<TruthSample>& truth,
                                             const SensorSpec& spec, std::uint64_t seed,
                                             const EarthModel& em = wgs84()) {
    if (truth.size() < 3)
        throw InvalidConfig("imu_from_truth: truth series too short");
    const double truth_dt = truth[1].t - truth[0].t;
    const double half = spec.imu_dt / 2.0;
    const long m = std::lround(half / truth_dt);
    if (m < 1 || std::abs(m * truth_dt - half) > 1e-9 * spec.imu_dt || (m > 1 && m % 2 != 0))
        throw InvalidConfig("imu_from_truth: truth grid must be T/2 or an even fraction of it");

    // residual integrand of the by-parts form, per truth sample
    std::vector<Vec3> resid(truth.size());
    for (size_t i = 0; i < truth.size(); ++i) {
        const auto& s = truth[i];
        const Dcm c_nb = s.c_bn.transpose();
        const Vec3 w_in = earth_rate_n(s.p.lat, em) + transport_rate(s.v_n, s.p, em);
        const Vec3 w_nb = s.w_ib_b - c_nb * w_in;
        const Vec3 cor = (2.0 * earth_rate_n(s.p.lat, em) + transport_rate(s.v_n, s.p, em))
                             .cross(s.v_n) -
                         gravity(s.p.lat, s.p.h, em);
        resid[i] = w_nb.cross(c_nb * s.v_n) + c_nb * cor;
    }

    const auto gyro_at = [&](size_t i) { return truth[i].w_ib_b; };
    const auto resid_at = [&](size_t i) { return resid[i]; };

    // integral over m consecutive fine intervals starting at sample i0
    const auto integrate = [&](const auto& f, size_t i0, bool second_half) -> Vec3 {
        if (m == 1) {
            // 3-point rules over the sample triple (i0, i0+1, i0+2)
            const Vec3 f0 = f(i0), f1 = f(i0 + 1), f2 = f(i0 + 2);
            if (!second_half)
                return (truth_dt / 12.0) * (5.0 * f0 + 8.0 * f1 - f2);
            return (truth_dt / 12.0) * (-f0 + 8.0 * f1 + 5.0 * f2);
        }
        const size_t base = second_half ? i0 + m : i0;
        Vec3 acc = f(base) + f(base + m);
        for (long j = 1; j < m; j += 2)
            acc += 4.0 * f(base + j);
        for (long j = 2; j < m; j += 2)
            acc += 2.0 * f(base + j);
        return (truth_dt / 3.0) * acc;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sg = spec.arw * std::sqrt(half);
    const double sa = spec.accel_nd * std::sqrt(half);
    const auto noise3 = [&](double sigma) {
        return Vec3(gauss(rng) * sigma, gauss(rng) * sigma, gauss(rng) * sigma);
    };

    const size_t per_step = 2 * m;
    const size_t n_full = (truth.size() - 1) / per_step;
    std::vector<ImuSample> out;
    out.reserve(n_full);
    for (size_t k = 0; k < n_full; ++k) {
        const size_t i0 = k * per_step;
        const auto boundary = [&](size_t i) {
            return Vec3(truth[i].c_bn.transpose() * truth[i].v_n);
        };
        ImuSample s;
        s.t = truth[i0].t;
        s.dth1 = integrate(gyro_at, i0, false) + spec.gyro_bias * half + noise3(sg);
        s.dth2 = integrate(gyro_at, i0, true) + spec.gyro_bias * half + noise3(sg);
        s.dv1 = boundary(i0 + m) - boundary(i0) + integrate(resid_at, i0, false) +
                spec.accel_bias * half + noise3(sa);
        s.dv2 = boundary(i0 + per_step) - boundary(i0 + m) + integrate(resid_at, i0, true) +
                spec.accel_bias * half + noise3(sa);
        out.push_back(s);
    }
    return out;
}

// --- odometer encoding ----------------------------------------------------------

// N_k = floor(K d(t_k) + dp0). Emits one sample per `stride` truth samples.
inline std::vector<OdoSample> encode_odometer(const std::vector<TruthSample>& truth,
                                              const SensorSpec& spec, long stride = 1) {
    if (stride < 1)
        throw InvalidConfig("encode_odometer: stride must be >= 1");
    std::vector<OdoSample> out;
    out.reserve(truth.size() / stride + 1);
    double prev_d = -1.0;
    for (size_t i = 0; i < truth.size(); i += stride) {
        if (truth[i].d < prev_d)
            throw InvalidSegment("encode_odometer requires forward-only motion");
        prev_d = truth[i].d;
        out.push_back({truth[i].t,
                       static_cast<long long>(std::floor(spec.k * truth[i].d + spec.delta_p0))});
    }
    return out;
}

// Zero-mean Gaussian perturbation inside the schedule windows, identity outside.
inline std::vector<double> inject_noise(const std::vector<double>& times,
                                        std::vector<double> values, const NoiseSchedule& schedule,
                                        std::uint64_t seed) {
    schedule.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (size_t i = 0; i < values.size(); ++i) {
        const double s = schedule.std_at(times[i]);
        if (s > 0.0)
            values[i] += s * gauss(rng);
    }
    return values;
}

// --- lemma statistics -------------------------------------------------------------

struct LemmaStats {
    double accum_var{0.0};             // variance of the accumulated error e_k
    std::array<double, 20> accum_hist{}; // counts of e_k - (dp0 - 1) over (0, 1]
    double incr_var{0.0};              // variance of i_k = e_k - e_{k-1}
    double incr_lag1{0.0};             // lag-1 autocovariance of i_k
    long n{0};
};

// Accumulates e_k = N_k - K d(t_k) statistics into `stats` so several
// randomized runs can be pooled. Bounds are checked exactly: the shifted error
// must lie in (0, 1].
inline void accumulate_lemma_stats(const std::vector<OdoSample>& odo,
                                   const std::vector<double>& d_true, const SensorSpec& spec,
                                   LemmaStats& stats, std::vector<double>& shifted_pool,
                                   std::vector<double>& incr_pool) {
    if (odo.size() != d_true.size())
        throw InvalidConfig("lemma stats: series length mismatch");
    double prev_e = 0.0;
    for (size_t i = 0; i < odo.size(); ++i) {
        const double e = static_cast<double>(odo[i].n) - spec.k * d_true[i];
        const double u = e - (spec.delta_p0 - 1.0);
        shifted_pool.push_back(u);
        if (i > 0)
            incr_pool.push_back(e - prev_e);
        prev_e = e;
    }
    stats.n = static_cast<long>(shifted_pool.size());
}

inline LemmaStats finalize_lemma_stats(std::vector<double>& shifted_pool,
                                       std::vector<double>& incr_pool) {
    LemmaStats s;
    s.n = static_cast<long>(shifted_pool.size());
    if (s.n < 10000)
        throw InsufficientSamples("lemma statistics need at least 1e4 samples");

    double mean = 0.0;
    for (double u : shifted_pool)
        mean += u;
    mean /= s.n;
    double var = 0.0;
    for (double u : shifted_pool) {
        var += (u - mean) * (u - mean);
        int bin = static_cast<int>(std::ceil(u * 20.0)) - 1;
        if (bin < 0)
            bin = 0;
        if (bin > 19)
            bin = 19;
        s.accum_hist[bin] += 1.0;
    }
    s.accum_var = var / (s.n - 1);

    const long ni = static_cast<long>(incr_pool.size());
    double imean = 0.0;
    for (double v : incr_pool)
        imean += v;
    imean /= ni;
    double ivar = 0.0, lag1 = 0.0;
    for (long i = 0; i < ni; ++i) {
        ivar += (incr_pool[i] - imean) * (incr_pool[i] - imean);
        if (i > 0)
            lag1 += (incr_pool[i] - imean) * (incr_pool[i - 1] - imean);
    }
    s.incr_var = ivar / (ni - 1);
    s.incr_lag1 = lag1 / (ni - 1);
    return s;
}

// Single-series convenience form over a generated run.
inline LemmaStats lemma_stats(const std::vector<OdoSample>& odo,
                              const std::vector<TruthSample>& truth, const SensorSpec& spec) {
    std::vector<double> d_true;
    d_true.reserve(odo.size());
    size_t ti = 0;
    for (const auto& o : odo) {
        while (ti < truth.size() && truth[ti].t < o.t - 1e-9)
            ++ti;
        if (ti >= truth.size() || std::abs(truth[ti].t - o.t) > 1e-9)
            throw InvalidConfig("lemma stats: odometer sample time not on the truth grid");
        d_true.push_back(truth[ti].d);
    }
    LemmaStats stats;
    std::vector<double> shifted, incr;
    accumulate_lemma_stats(odo, d_true, spec, stats, shifted, incr);
    return finalize_lemma_stats(shifted, incr);
}

} // namespace insod
