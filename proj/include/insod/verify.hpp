#pragma once

// Self-contained verification suites: Monte-Carlo lemma statistics,
// finite-difference Jacobian checks, fine-quadrature integral checks, and the
// prefilter accuracy reproduction. The oracles here are independent of the
// closed forms they check; the CLI `verify` command and the acceptance suite
// both run them.

#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "insod/fusion.hpp"
#include "insod/odometry.hpp"
#include "insod/strapdown.hpp"
#include "insod/trajsim.hpp"

namespace insod {

struct CheckResult {
    std::string name;
    double measured{0.0};
    double lo{0.0}, hi{0.0}; // pass iff lo <= measured <= hi
    bool pass{false};
};

inline CheckResult check_range(const std::string& name, double measured, double lo, double hi) {
    return {name, measured, lo, hi, measured >= lo && measured <= hi};
}

namespace verify_detail {

inline int worker_count() {
    if (const char* env = std::getenv("INSOD_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1)
            return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// One motion step with linear body rate and velocity plus a rotating
// navigation frame, propagated at 1 kHz for the quadrature oracles.
struct OracleStep {
    Dcm c_bn0;
    Vec3 v0, v1, w0, w1, w_ie_n, w_in_n;
    double t{0.02};

    Vec3 rate(double tau) const { return w0 + (w1 - w0) * (tau / t); }
    Vec3 vel(double tau) const { return v0 + (v1 - v0) * (tau / t); }
    Vec3 dtheta(double a, double b) const {
        const Vec3 slope = (w1 - w0) / t;
        return w0 * (b - a) + 0.5 * slope * (b * b - a * a);
    }
};

inline OracleStep random_step(std::mt19937_64& rng, double v_max, double w_max) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const auto unit = [&] { return Vec3(Vec3(u(rng), u(rng), u(rng)).normalized()); };
    OracleStep s;
    s.c_bn0 = rotvec_to_dcm(unit() * u(rng) * M_PI);
    s.v0 = unit() * u01(rng) * v_max;
    s.v1 = s.v0 + unit() * 0.04;
    s.w0 = unit() * u01(rng) * w_max;
    s.w1 = s.w0 + unit() * (0.1 * w_max);
    const double lat = (0.2 + 0.6 * u01(rng)) * M_PI / 2.0 * (u(rng) > 0 ? 1.0 : -1.0);
    s.w_ie_n = earth_rate_n(lat);
    s.w_in_n = s.w_ie_n + unit() * 4e-6;
    return s;
}

// C_n^b at substep i of an exact frame propagation with `n` substeps.
inline std::vector<Dcm> c_nb_history(const OracleStep& s, int n) {
    std::vector<Dcm> out(n + 1);
    Dcm c_bt_b0 = Dcm::Identity();
    const double dt = s.t / n;
    out[0] = s.c_bn0.transpose();
    for (int i = 0; i < n; ++i) {
        c_bt_b0 = c_bt_b0 * rotvec_to_dcm(s.dtheta(i * dt, (i + 1) * dt));
        const Dcm c_n0_nt = rotvec_to_dcm(-s.w_in_n * ((i + 1) * dt));
        out[i + 1] = c_bt_b0.transpose() * s.c_bn0.transpose() * c_n0_nt.transpose();
    }
    return out;
}

template <typename F>
inline auto simpson(const F& f, int n, double dt) -> std::decay_t<decltype(f(0))> {
    std::decay_t<decltype(f(0))> acc = f(0);
    acc += f(n);
    for (int i = 1; i < n; i += 2)
        acc += 4.0 * f(i);
    for (int i = 2; i < n; i += 2)
        acc += 2.0 * f(i);
    acc *= dt / 3.0;
    return acc;
}

} // namespace verify_detail

// --- lemma statistics ------------------------------------------------------------

inline std::vector<CheckResult> verify_lemmas(std::uint64_t seed, long samples = 200000) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> speed(5.0, 25.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double t = 0.02;
    const int runs = 10;
    const long per_run = samples / runs;

    LemmaStats stats;
    std::vector<double> shifted, incr;
    bool bound_ok = true;
    for (int run = 0; run < runs; ++run) {
        SensorSpec spec = default_sensor_spec();
        spec.delta_p0 = u01(rng);
        std::vector<OdoSample> odo(per_run);
        std::vector<double> d_true(per_run);
        double d = 0.0;
        for (long i = 0; i < per_run; ++i) {
            d += speed(rng) * t;
            d_true[i] = d;
            odo[i] = {i * t, static_cast<long long>(std::floor(spec.k * d + spec.delta_p0))};
            const double e = static_cast<double>(odo[i].n) - spec.k * d;
            if (!(e > spec.delta_p0 - 1.0 && e <= spec.delta_p0))
                bound_ok = false;
        }
        accumulate_lemma_stats(odo, d_true, spec, stats, shifted, incr);
    }
    const LemmaStats s = finalize_lemma_stats(shifted, incr);

    const double expected = static_cast<double>(s.n) / 20.0;
    double chi2 = 0.0;
    for (double count : s.accum_hist)
        chi2 += (count - expected) * (count - expected) / expected;

    std::vector<CheckResult> out;
    out.push_back(check_range("lemma1.accum_var", s.accum_var, (1.0 / 12.0) * 0.95,
                              (1.0 / 12.0) * 1.05));
    out.push_back(check_range("lemma1.chi2_20bins", chi2, 0.0, 36.191));
    out.push_back(check_range("lemma1.bound_violations", bound_ok ? 0.0 : 1.0, 0.0, 0.0));
    out.push_back(
        check_range("lemma2.incr_var", s.incr_var, (1.0 / 6.0) * 0.95, (1.0 / 6.0) * 1.05));
    out.push_back(check_range("lemma2.incr_lag1", s.incr_lag1, -(1.0 / 12.0) * 1.10,
                              -(1.0 / 12.0) * 0.90));
    return out;
}

// --- Jacobian finite differences ----------------------------------------------------

namespace verify_detail {

struct JacState {
    NavState nav;
    MountParams mount;
    Vec3 w_ib_corr;
};

inline JacState random_jac_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    JacState s;
    s.nav.c_bn = rotvec_to_dcm(Vec3(u(rng), u(rng), u(rng)).normalized() * u(rng) * M_PI);
    s.nav.v_n = Vec3(u(rng) * 25.0, u(rng) * 0.5, u(rng) * 25.0);
    s.nav.p = {u(rng) * 2.0, u(rng) * 1.2, 100.0 * u(rng)};
    s.mount.k = 59.8 * (1.0 + 0.05 * u(rng));
    s.mount.psi = deg(3.0) + 0.02 * u(rng);
    s.mount.theta = deg(2.0) + 0.02 * u(rng);
    s.mount.l_b = Vec3(1.0, 0.5, 0.8) + 0.2 * Vec3(u(rng), u(rng), u(rng));
    s.w_ib_corr = Vec3(u(rng), u(rng), u(rng)) * 0.15;
    return s;
}

inline double rate_with_errors(const JacState& s, const Row21& eps, int axis, bool with_k) {
    const Dcm c_nb = s.nav.c_nb() * (Mat3::Identity() + skew(eps.segment<3>(kIdxPhi).transpose()));
    const Vec3 v = s.nav.v_n + eps.segment<3>(kIdxDv).transpose();
    const Geodetic p{s.nav.p.lon + eps(kIdxDp), s.nav.p.lat + eps(kIdxDp + 1),
                     s.nav.p.h + eps(kIdxDp + 2)};
    const Vec3 w_ib = s.w_ib_corr - eps.segment<3>(kIdxBg).transpose();
    const double k = s.mount.k + eps(kIdxDk);
    const Dcm c_bm = mount_dcm(s.mount.phi, s.mount.theta + eps(kIdxTheta),
                               s.mount.psi + eps(kIdxPsi));
    const Vec3 l = s.mount.l_b + eps.segment<3>(kIdxDl).transpose();
    const Vec3 w_eb = w_ib - c_nb * earth_rate_n(p.lat);
    return (with_k ? k : 1.0) * (c_bm.row(axis) * (c_nb * v + w_eb.cross(l)))(0);
}

inline Row21 fd_steps() {
    Row21 steps = Row21::Zero();
    steps.segment<3>(kIdxPhi).setConstant(1e-6);
    steps.segment<3>(kIdxDv).setConstant(1e-2);
    steps.segment<3>(kIdxDp).setConstant(1e-4);
    steps(kIdxDp + 2) = 1.0;
    steps.segment<3>(kIdxBg).setConstant(1e-4);
    steps.segment<3>(kIdxBa).setConstant(1e-4);
    steps(kIdxDk) = 1e-2;
    steps(kIdxPsi) = 1e-6;
    steps(kIdxTheta) = 1e-6;
    steps.segment<3>(kIdxDl).setConstant(1e-2);
    return steps;
}

inline double max_rel_row_dev(const Row21& analytic, const JacState& s, int axis, bool with_k) {
    const Row21 steps = fd_steps();
    const double scale = analytic.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (int i = 0; i < kErrDim; ++i) {
        Row21 eps = Row21::Zero();
        eps(i) = steps(i);
        const double fp = rate_with_errors(s, eps, axis, with_k);
        eps(i) = -steps(i);
        const double fm = rate_with_errors(s, eps, axis, with_k);
        const double fd = (fp - fm) / (2.0 * steps(i));
        const double denom = std::max({std::abs(analytic(i)), std::abs(fd), 1e-6 * scale});
        worst = std::max(worst, std::abs(analytic(i) - fd) / denom);
    }
    return worst;
}

} // namespace verify_detail

inline std::vector<CheckResult> verify_jacobians(std::uint64_t seed, int states = 100) {
    using namespace verify_detail;
    std::mt19937_64 rng(seed);
    double worst_fwd = 0.0, worst_nhc = 0.0, worst_dk = 0.0;
    for (int i = 0; i < states; ++i) {
        const JacState s = random_jac_state(rng);
        const Vec3 w_eb = omega_eb_b(s.w_ib_corr, s.nav.c_nb(), earth_rate_n(s.nav.p.lat));
        const Row21 row = jac_sdot(s.nav, s.mount, w_eb);
        worst_fwd = std::max(worst_fwd, max_rel_row_dev(row, s, 0, true));

        const double sdot = s_dot(s.nav, s.mount, w_eb);
        worst_dk = std::max(worst_dk,
                            std::abs(row(kIdxDk) * s.mount.k - sdot) /
                                std::max(std::abs(sdot), 1e-12));

        const auto [pred, jac] = nhc_value_and_jac(s.nav, s.mount, w_eb);
        worst_nhc = std::max(worst_nhc, max_rel_row_dev(jac.row(0), s, 1, false));
        worst_nhc = std::max(worst_nhc, max_rel_row_dev(jac.row(1), s, 2, false));
    }
    std::vector<CheckResult> out;
    out.push_back(check_range("jacobians.forward_rate_max_rel_dev", worst_fwd, 0.0, 1e-5));
    out.push_back(check_range("jacobians.dk_column_identity", worst_dk, 0.0, 1e-12));
    out.push_back(check_range("jacobians.nhc_rows_max_rel_dev", worst_nhc, 0.0, 1e-5));
    return out;
}

// --- closed-form integrals vs fine quadrature --------------------------------------

inline std::vector<CheckResult> verify_integrals(std::uint64_t seed, int trials = 1000) {
    using namespace verify_detail;
    const double t = 0.02;
    const Vec3 l(1.0, 0.5, 0.8);

    const int workers = worker_count();
    std::vector<double> worst_lvi(workers, 0.0), worst_c(workers, 0.0), worst_cv(workers, 0.0),
        worst_hk(workers, 0.0);

    const auto run_chunk = [&](int w) {
        std::mt19937_64 rng(seed + 1000 + w);
        const int n = 20; // 1 kHz
        for (int trial = w; trial < trials; trial += workers) {
            // lever-velocity integral on mild motion
            {
                const OracleStep s = random_step(rng, 6.0, 0.05);
                const auto hist = c_nb_history(s, n);
                const Vec3 ref = simpson(
                    [&](int i) -> Vec3 {
                        const double tau = i * (t / n);
                        return hist[i] * s.vel(tau) + s.rate(tau).cross(l) -
                               (hist[i] * s.w_ie_n).cross(l);
                    },
                    n, t / n);
                NavState nav;
                nav.c_bn = s.c_bn0;
                nav.v_n = s.v0;
                nav.p = {0.0, std::asin(s.w_ie_n(1) / s.w_ie_n.norm()), 0.0};
                const Vec3 got = lever_velocity_integral(nav, s.dtheta(0, t / 2),
                                                         s.dtheta(t / 2, t), s.v0, s.v1, l, t);
                worst_lvi[w] = std::max(worst_lvi[w], (got - ref).norm());
            }
            // DCM integrals at paper-scale motion
            {
                const OracleStep s = random_step(rng, 25.0, 0.15);
                const auto hist = c_nb_history(s, n);
                const Mat3 ref_c = simpson([&](int i) -> Mat3 { return hist[i]; }, n, t / n);
                const Mat3 ref_cv = simpson(
                    [&](int i) -> Mat3 { return hist[i] * skew(s.vel(i * (t / n))); }, n, t / n);
                NavState nav;
                nav.c_bn = s.c_bn0;
                nav.v_n = s.v0;
                const auto ints =
                    dcm_integrals(nav, s.dtheta(0, t / 2), s.dtheta(t / 2, t), s.v0, s.v1, t);
                worst_c[w] = std::max(worst_c[w], (ints.int_c_nb - ref_c).cwiseAbs().maxCoeff() /
                                                      ref_c.cwiseAbs().maxCoeff());
                worst_cv[w] =
                    std::max(worst_cv[w], (ints.int_c_nb_vx - ref_cv).cwiseAbs().maxCoeff() /
                                              ref_cv.cwiseAbs().maxCoeff());
            }
            // integrated measurement row on mild driving
            {
                const OracleStep s = random_step(rng, 15.0, 0.1);
                MountParams mount;
                mount.k = 59.8;
                mount.psi = deg(3.0);
                mount.theta = deg(2.0);
                mount.l_b = l;
                const double lat = std::asin(s.w_ie_n(1) / s.w_ie_n.norm());
                const auto hist = c_nb_history(s, n);
                const Row21 quad = simpson(
                    [&](int i) -> Row21 {
                        NavState nav;
                        nav.c_bn = hist[i].transpose();
                        nav.v_n = s.vel(i * (t / n));
                        nav.p = {0.0, lat, 0.0};
                        const Vec3 w_eb = s.rate(i * (t / n)) - hist[i] * s.w_ie_n;
                        return jac_sdot(nav, mount, w_eb);
                    },
                    n, t / n);
                NavState nav0;
                nav0.c_bn = s.c_bn0;
                nav0.v_n = s.v0;
                nav0.p = {0.0, lat, 0.0};
                const Vec3 w_eb_avg = s.dtheta(0, t) / t - nav0.c_nb() * s.w_ie_n;
                const Row21 h = h_k_integrated(
                    nav0, mount, {s.dtheta(0, t / 2), s.dtheta(t / 2, t), s.v0, s.v1, t},
                    w_eb_avg);
                worst_hk[w] = std::max(worst_hk[w], (h - quad).cwiseAbs().maxCoeff() /
                                                        quad.cwiseAbs().maxCoeff());
            }
        }
    };

    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w)
        pool.emplace_back(run_chunk, w);
    run_chunk(0);
    for (auto& th : pool)
        th.join();

    const auto vmax = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end());
    };
    std::vector<CheckResult> out;
    out.push_back(check_range("integrals.lever_velocity_abs_err_m", vmax(worst_lvi), 0.0, 1e-7));
    out.push_back(check_range("integrals.dcm_int_rel_err", vmax(worst_c), 0.0, 1e-5));
    out.push_back(check_range("integrals.dcm_vx_int_rel_err", vmax(worst_cv), 0.0, 1e-5));
    out.push_back(check_range("integrals.h_row_rel_err", vmax(worst_hk), 0.0, 1.5e-5));
    return out;
}

// --- prefilter accuracy ---------------------------------------------------------------

inline std::vector<CheckResult> verify_prefilter(std::uint64_t seed) {
    const double t = 0.02;
    (void)seed;

    // constant rate: error below 0.5 p/s almost surely after warm-up
    double frac_ok;
    {
        const double rate = 500.0;
        PulseVelKf kf = PulseVelKf::init(0.0);
        long ok = 0, total = 0;
        for (int k = 1; k <= 3000; ++k) {
            const double est = pv_prefilter_step(kf, std::floor(rate * k * t), t);
            if (k * t > 10.0) {
                ++total;
                if (std::abs(est - rate) < 0.5)
                    ++ok;
            }
        }
        frac_ok = static_cast<double>(ok) / total;
    }

    // sine acceleration: the constant-acceleration model must visibly lag
    double spike;
    {
        PulseVelKf kf = PulseVelKf::init(0.0);
        const double k_scale = 59.8;
        double d = 0.0, u = 8.0;
        spike = 0.0;
        for (int k = 1; k <= 3000; ++k) {
            const double tk = k * t;
            double udot = 0.0;
            if (tk > 20.0 && tk <= 30.0)
                udot = 0.5 * 12.0 * (M_PI / 10.0) * std::sin(M_PI * (tk - 20.0) / 10.0);
            u += udot * t;
            d += u * t;
            const double est = pv_prefilter_step(kf, std::floor(k_scale * d), t);
            if (tk > 20.0 && tk <= 31.0)
                spike = std::max(spike, std::abs(est - k_scale * u));
        }
    }

    std::vector<CheckResult> out;
    out.push_back(check_range("prefilter.const_rate_frac_within_half_pps", frac_ok, 0.95, 1.0));
    out.push_back(check_range("prefilter.sine_accel_peak_err_pps", spike, 0.5, 1e9));
    return out;
}

} // namespace insod
