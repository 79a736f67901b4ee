#pragma once

// Indirect (error-state) EKF over the 21/22-dimensional state with closed-loop
// feedback after every update, plus the MMAE bank over measurement-noise
// standard deviations.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "insod/errors.hpp"
#include "insod/frames.hpp"
#include "insod/odometry.hpp"
#include "insod/strapdown.hpp"
#include "insod/trajsim.hpp"

namespace insod {

struct FilterConfig {
    MeasKind kind{MeasKind::PulseVelocity};
    MeasConfig meas{};
    double update_interval{1.0}; // s, must be a multiple of the IMU interval
    bool gating{true};           // PV innovation gating (ignored for PA/PI)
    bool mmae{false};
    std::vector<double> mmae_stds{};

    // process noise densities (from the sensor grade)
    double arw{deg(0.001) / 60.0};      // rad/sqrt(s)
    double vrw{5e-6 * 9.80665};         // (m/s^2)/sqrt(Hz)
    double param_floor_rel{1e-12};      // PSD floor relative to P0, 1/s

    // initial covariance (1-sigma)
    double p0_att{deg(0.1)};
    double p0_vel{0.1};
    double p0_pos_h{1.0};
    double p0_pos_v{2.0};
    double p0_bg{deg(0.01) / 3600.0};
    double p0_ba{50e-6 * 9.80665};
    double p0_dk_rel{0.05};
    double p0_mount{deg(3.0)};
    double p0_lever{1.0};
    double p0_ds{1.0};

    double q_jerk{1e4};          // prefilter jerk PSD, (pulses/s^3)^2 * s
    NoiseSchedule injected{};    // measurement-noise injection at update times
    std::uint64_t seed{0};

    int state_dim() const { return kind == MeasKind::PulseAccumulation ? kAugDim : kErrDim; }
};

// Model banks used when nothing else is configured.
inline std::vector<double> default_model_bank(MeasKind kind) {
    switch (kind) {
        case MeasKind::PulseAccumulation:
            return {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
        case MeasKind::PulseIncrement:
            return {0.5, 1.0, 2.0};
        case MeasKind::PulseVelocity:
            return {1.0, 2.0, 3.0, 5.0};
    }
    return {};
}

// Bank extension bracketing the injected noise levels of the schedule runs.
inline std::vector<double> extended_model_bank(MeasKind kind) {
    auto bank = default_model_bank(kind);
    if (kind == MeasKind::PulseVelocity)
        bank.push_back(20.0);
    else {
        bank.push_back(2.0);
        bank.push_back(5.0);
    }
    std::sort(bank.begin(), bank.end());
    bank.erase(std::unique(bank.begin(), bank.end()), bank.end());
    return bank;
}

// --- error dynamics -------------------------------------------------------------

// Continuous-time dynamics matrix. Rows for biases, K, mounting and lever are
// zero (random constants); PA mode appends the augmented ds row.
inline Eigen::MatrixXd f_matrix(const NavState& nav, const MountParams& mount,
                                const Vec3& f_b_corrected, const Vec3& w_eb_b, bool augmented,
                                const EarthModel& em = wgs84()) {
    const int n = augmented ? kAugDim : kErrDim;
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);

    const Geodetic& p = nav.p;
    const Vec3& v = nav.v_n;
    const Vec3 w_ie = earth_rate_n(p.lat, em);
    const Vec3 w_en = transport_rate(v, p, em);
    const Mat3 jie = earth_rate_jacobian(p.lat, em);
    Mat3 jen_v, jen_p;
    transport_rate_jacobians(v, p, em, jen_v, jen_p);

    const auto [re, rn] = radii(p.lat, em);
    const auto [dre, drn] = radii_dlat(p.lat, em);
    const double cl = std::cos(p.lat), sl = std::sin(p.lat);
    const double reh = re + p.h, rnh = rn + p.h;

    Mat3 jrcv = Mat3::Zero(); // d(R_c v)/dp
    jrcv(0, 1) = v(2) * (-dre / (reh * reh * cl) + sl / (reh * cl * cl));
    jrcv(0, 2) = -v(2) / (reh * reh * cl);
    jrcv(1, 1) = -v(0) * drn / (rnh * rnh);
    jrcv(1, 2) = -v(0) / (rnh * rnh);

    const auto [dgdl, dgdh] = gravity_gradient(p.lat, p.h, em);
    Mat3 jg = Mat3::Zero();
    jg(1, 1) = -dgdl;
    jg(1, 2) = -dgdh;

    const Vec3 f_n = nav.c_bn * f_b_corrected;

    f.block<3, 3>(kIdxPhi, kIdxPhi) = -skew(w_ie + w_en);
    f.block<3, 3>(kIdxPhi, kIdxDv) = jen_v;
    f.block<3, 3>(kIdxPhi, kIdxDp) = jie + jen_p;
    f.block<3, 3>(kIdxPhi, kIdxBg) = nav.c_bn;

    f.block<3, 3>(kIdxDv, kIdxPhi) = skew(f_n);
    f.block<3, 3>(kIdxDv, kIdxDv) = -skew(2.0 * w_ie + w_en) + skew(v) * jen_v;
    f.block<3, 3>(kIdxDv, kIdxDp) = skew(v) * (2.0 * jie + jen_p) + jg;
    f.block<3, 3>(kIdxDv, kIdxBa) = -nav.c_bn;

    f.block<3, 3>(kIdxDp, kIdxDv) = curvature_matrix(p, em);
    f.block<3, 3>(kIdxDp, kIdxDp) = jrcv;

    if (augmented)
        f.row(kIdxDs).head<kErrDim>() = jac_sdot(nav, mount, w_eb_b, em);
    return f;
}

// Discrete process noise for one IMU step: sensor noise mapped through the
// attitude (and, in PA mode, the direct gyro-to-ds feedthrough), plus tiny
// random-walk floors that keep the parameter rows from collapsing.
inline Eigen::MatrixXd process_noise_step(const NavState& nav, const MountParams& mount,
                                          const FilterConfig& cfg, const Eigen::VectorXd& p0_diag,
                                          double t) {
    const int n = cfg.state_dim();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 6);
    g.block<3, 3>(kIdxPhi, 0) = nav.c_bn;
    g.block<3, 3>(kIdxDv, 3) = nav.c_bn;
    if (n == kAugDim)
        g.block<1, 3>(kIdxDs, 0) = -mount.k * mount.c_bm().row(0) * skew(mount.l_b);

    Eigen::Matrix<double, 6, 6> qc = Eigen::Matrix<double, 6, 6>::Zero();
    qc.topLeftCorner<3, 3>() = cfg.arw * cfg.arw * Mat3::Identity();
    qc.bottomRightCorner<3, 3>() = cfg.vrw * cfg.vrw * Mat3::Identity();

    Eigen::MatrixXd qd = g * qc * g.transpose() * t;
    for (int i = kIdxBg; i < n; ++i)
        qd(i, i) += cfg.param_floor_rel * p0_diag(i) * t;
    return qd;
}

inline void check_psd(const Eigen::MatrixXd& p) {
    if (!p.allFinite())
        throw CovarianceNotPD("covariance contains non-finite entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * p.trace())
        throw CovarianceNotPD("covariance lost positive semidefiniteness");
}

// First-order discretization Phi = I + F T.
inline Eigen::MatrixXd propagate(const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
                                 const Eigen::MatrixXd& q, double t) {
    const Eigen::MatrixXd phi =
        Eigen::MatrixXd::Identity(f.rows(), f.cols()) + f * t;
    Eigen::MatrixXd out = phi * p * phi.transpose() + q;
    return 0.5 * (out + out.transpose());
}

// --- measurement update -----------------------------------------------------------

struct UpdateResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd p;
    Eigen::VectorXd innovation;
    Eigen::MatrixXd s;
};

// Joseph-form EKF update. The innovation subtracts H x because x carries the
// error estimate accumulated since the last feedback.
inline UpdateResult update(const Eigen::VectorXd& x, const Eigen::MatrixXd& p,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& zhat,
                           const Eigen::MatrixXd& h, const Eigen::MatrixXd& r) {
    UpdateResult out;
    out.innovation = z - zhat - h * x;
    out.s = h * p * h.transpose() + r;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(out.s);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw SingularInnovationCovariance("innovation covariance not positive definite");
    const Eigen::MatrixXd k = ldlt.solve(h * p).transpose();
    out.x = x + k * out.innovation;
    const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(p.rows(), p.cols()) - k * h;
    out.p = ikh * p * ikh.transpose() + k * r * k.transpose();
    out.p = 0.5 * (out.p + out.p.transpose());
    return out;
}

// Closed-loop correction: estimate minus estimated error, attitude via the
// exact inverse of the multiplicative error definition. Resets x to zero.
inline void feedback(NavState& nav, MountParams& mount, Vec3& bg, Vec3& ba, Eigen::VectorXd& x) {
    const Vec3 phi = x.segment<3>(kIdxPhi);
    const Mat3 inv = (Mat3::Identity() + skew(phi)).inverse();
    nav.c_bn = orthonormalize(inv.transpose() * nav.c_bn);
    nav.v_n -= x.segment<3>(kIdxDv);
    nav.p.lon = wrap_pi(nav.p.lon - x(kIdxDp));
    nav.p.lat -= x(kIdxDp + 1);
    nav.p.h -= x(kIdxDp + 2);
    bg -= x.segment<3>(kIdxBg);
    ba -= x.segment<3>(kIdxBa);
    mount.k -= x(kIdxDk);
    mount.psi -= x(kIdxPsi);
    mount.theta -= x(kIdxTheta);
    mount.l_b -= x.segment<3>(kIdxDl);
    if (x.size() == kAugDim)
        nav.s -= x(kIdxDs);
    x.setZero();
}

// Innovation gating for the pulse-velocity row: beyond the raw threshold the
// odometer std is inflated; NHC rows are never touched.
inline Eigen::MatrixXd gate(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& /*s*/,
                            const MeasConfig& cfg, Eigen::MatrixXd r) {
    if (std::abs(innovation(0)) >= cfg.innovation_threshold)
        r(0, 0) = cfg.inflated_std * cfg.inflated_std;
    return r;
}

// --- MMAE -------------------------------------------------------------------------

struct ModelEntry {
    double std{1.0};
    double weight{0.0};
    Eigen::VectorXd x;
    Eigen::MatrixXd p;
    Eigen::VectorXd innovation;
    Eigen::MatrixXd s;
};

struct ModelBank {
    std::vector<ModelEntry> models;
    double weight_floor{1e-6};

    static ModelBank init(const std::vector<double>& stds, const Eigen::MatrixXd& p0) {
        if (stds.size() < 2)
            throw InvalidConfig("MMAE bank needs at least two models");
        ModelBank bank;
        for (double s : stds) {
            ModelEntry m;
            m.std = s;
            m.weight = 1.0 / stds.size();
            m.x = Eigen::VectorXd::Zero(p0.rows());
            m.p = p0;
            bank.models.push_back(std::move(m));
        }
        return bank;
    }
};

namespace detail {

// Floor-and-normalize keeping the simplex exact: weights below the floor are
// pinned to it, the remainder is distributed proportionally.
inline void floor_and_normalize(std::vector<ModelEntry>& models, double floor) {
    double sum = 0.0;
    for (auto& m : models)
        sum += m.weight;
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        for (auto& m : models)
            m.weight = 1.0 / models.size();
        return;
    }
    for (auto& m : models)
        m.weight /= sum;
    for (int pass = 0; pass < static_cast<int>(models.size()); ++pass) {
        double pinned = 0.0, free_sum = 0.0;
        bool any_low = false;
        for (auto& m : models) {
            if (m.weight <= floor) {
                any_low = true;
                pinned += floor;
            } else {
                free_sum += m.weight;
            }
        }
        if (!any_low)
            return;
        const double scale = (1.0 - pinned) / free_sum;
        bool stable = true;
        for (auto& m : models) {
            if (m.weight <= floor) {
                m.weight = floor;
            } else {
                m.weight *= scale;
                if (m.weight < floor)
                    stable = false;
            }
        }
        if (stable)
            return;
    }
}

} // namespace detail

struct MmaeResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd p;
    Eigen::VectorXd innovation; // residual of the highest-weight model
    double adapted_std{0.0};
};

// One MMAE cycle: per-model update, Bayesian weight update on the residual
// likelihoods (log-domain, so underflow only happens when every model is
// non-finite, which re-uniforms the weights), and moment-matched fusion.
inline MmaeResult mmae_step(ModelBank& bank, const Eigen::VectorXd& z, const Eigen::VectorXd& zhat,
                            const Eigen::MatrixXd& h, const Eigen::MatrixXd& r_template) {
    const size_t m = bank.models.size();
    std::vector<double> loglik(m);
    bool any_finite = false;
    for (size_t j = 0; j < m; ++j) {
        auto& mj = bank.models[j];
        Eigen::MatrixXd rj = r_template;
        rj(0, 0) = mj.std * mj.std;
        const UpdateResult res = update(mj.x, mj.p, z, zhat, h, rj);
        mj.x = res.x;
        mj.p = res.p;
        mj.innovation = res.innovation;
        mj.s = res.s;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(res.s);
        const double quad = res.innovation.dot(ldlt.solve(res.innovation));
        const double logdet = std::log(ldlt.vectorD().prod()) +
                              res.s.rows() * std::log(2.0 * M_PI);
        loglik[j] = -0.5 * (quad + logdet);
        if (std::isfinite(loglik[j]))
            any_finite = true;
    }
    if (!any_finite) {
        // DegenerateLikelihoods: recover by re-uniforming
        for (auto& mj : bank.models)
            mj.weight = 1.0 / m;
    } else {
        const double peak = *std::max_element(loglik.begin(), loglik.end());
        for (size_t j = 0; j < m; ++j) {
            const double lik = std::isfinite(loglik[j]) ? std::exp(loglik[j] - peak) : 0.0;
            bank.models[j].weight *= lik;
        }
        detail::floor_and_normalize(bank.models, bank.weight_floor);
    }

    MmaeResult out;
    const int n = static_cast<int>(bank.models[0].x.size());
    out.x = Eigen::VectorXd::Zero(n);
    out.adapted_std = 0.0;
    size_t best = 0;
    for (size_t j = 0; j < m; ++j) {
        out.x += bank.models[j].weight * bank.models[j].x;
        out.adapted_std += bank.models[j].weight * bank.models[j].std;
        if (bank.models[j].weight > bank.models[best].weight)
            best = j;
    }
    out.p = Eigen::MatrixXd::Zero(n, n);
    for (size_t j = 0; j < m; ++j) {
        const Eigen::VectorXd dx = bank.models[j].x - out.x;
        out.p += bank.models[j].weight * (dx * dx.transpose() + bank.models[j].p);
    }
    out.p = 0.5 * (out.p + out.p.transpose());
    out.innovation = bank.models[best].innovation;
    return out;
}

// --- filter driver ------------------------------------------------------------------

struct InitialEstimate {
    NavState nav{};
    MountParams mount{};
    Vec3 bg{Vec3::Zero()};
    Vec3 ba{Vec3::Zero()};
};

struct FilterOutput {
    double t{0.0};
    NavState nav{};
    MountParams mount{};
    Vec3 bg{Vec3::Zero()}, ba{Vec3::Zero()};
    Eigen::VectorXd cov_diag;
    Eigen::VectorXd innovation;
    std::vector<double> weights;  // empty unless MMAE
    double adapted_std{0.0};      // effective odometer std used this update
};

// Initial covariance diagonal; position sigmas are given in metres and mapped
// onto the geodetic error states at the initial latitude.
inline Eigen::VectorXd initial_covariance_diag(const FilterConfig& cfg, const Geodetic& p0,
                                               double k_true, const EarthModel& em = wgs84()) {
    const auto [re, rn] = radii(p0.lat, em);
    Eigen::VectorXd d(cfg.state_dim());
    d.segment<3>(kIdxPhi).setConstant(cfg.p0_att * cfg.p0_att);
    d.segment<3>(kIdxDv).setConstant(cfg.p0_vel * cfg.p0_vel);
    const double slon = cfg.p0_pos_h / ((re + p0.h) * std::cos(p0.lat));
    const double slat = cfg.p0_pos_h / (rn + p0.h);
    d(kIdxDp) = slon * slon;
    d(kIdxDp + 1) = slat * slat;
    d(kIdxDp + 2) = cfg.p0_pos_v * cfg.p0_pos_v;
    d.segment<3>(kIdxBg).setConstant(cfg.p0_bg * cfg.p0_bg);
    d.segment<3>(kIdxBa).setConstant(cfg.p0_ba * cfg.p0_ba);
    d(kIdxDk) = (cfg.p0_dk_rel * k_true) * (cfg.p0_dk_rel * k_true);
    d(kIdxPsi) = cfg.p0_mount * cfg.p0_mount;
    d(kIdxTheta) = cfg.p0_mount * cfg.p0_mount;
    d.segment<3>(kIdxDl).setConstant(cfg.p0_lever * cfg.p0_lever);
    if (cfg.state_dim() == kAugDim)
        d(kIdxDs) = cfg.p0_ds * cfg.p0_ds;
    return d;
}

// Estimate initialization from the true state: biases, mounting angles and
// lever arm start at zero knowledge, the scale factor at a few-percent guess,
// and the navigation solution is perturbed within the initial covariance.
// With perturb = false everything starts exactly on the truth.
inline InitialEstimate make_initial_estimate(const TruthSample& truth0, const SensorSpec& spec,
                                             const FilterConfig& cfg, std::uint64_t seed,
                                             bool perturb, const EarthModel& em = wgs84()) {
    InitialEstimate init;
    init.nav.c_bn = truth0.c_bn;
    init.nav.v_n = truth0.v_n;
    init.nav.p = truth0.p;
    init.nav.s = spec.k * truth0.d;

    if (perturb) {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const Vec3 dphi(gauss(rng) * cfg.p0_att, gauss(rng) * cfg.p0_att, gauss(rng) * cfg.p0_att);
        const Dcm c_nb = orthonormalize(init.nav.c_nb() * (Mat3::Identity() + skew(dphi)));
        init.nav.c_bn = c_nb.transpose();
        init.nav.v_n += Vec3(gauss(rng), gauss(rng), gauss(rng)) * cfg.p0_vel;
        const auto [re, rn] = radii(truth0.p.lat, em);
        init.nav.p.lat += gauss(rng) * cfg.p0_pos_h / (rn + truth0.p.h);
        init.nav.p.lon += gauss(rng) * cfg.p0_pos_h / ((re + truth0.p.h) * std::cos(truth0.p.lat));
        init.nav.p.h += gauss(rng) * cfg.p0_pos_v;

        init.mount.k = spec.k * (1.0 + 0.5 * cfg.p0_dk_rel * gauss(rng));
        init.mount.psi = 0.0;
        init.mount.theta = 0.0;
        init.mount.phi = 0.0;
        init.mount.l_b = Vec3::Zero();
        init.bg = Vec3::Zero();
        init.ba = Vec3::Zero();
    } else {
        init.mount.k = spec.k;
        init.mount.psi = spec.psi;
        init.mount.theta = spec.theta;
        init.mount.phi = spec.phi;
        init.mount.l_b = spec.lever;
        init.bg = spec.gyro_bias;
        init.ba = spec.accel_bias;
    }
    return init;
}

// One mechanization step shared by the filter and the pure-strapdown runs.
// The navigation-frame rotation is evaluated at mid-step values; anchoring it
// at the step start leaves a secular tilt that shows up as a Schuler-scale
// pulse-prediction drift over long runs.
inline NavState mechanize_step(const NavState& nav, const ImuSample& s, const Vec3& bg,
                               const Vec3& ba, double t, const EarthModel& em = wgs84()) {
    const Vec3 dth1 = s.dth1 - bg * (t / 2.0);
    const Vec3 dth2 = s.dth2 - bg * (t / 2.0);
    NavState out = nav;
    out.v_n = velocity_update(nav, dth1, dth2, s.dv1, s.dv2, ba, t, em);
    out.p = position_update(nav.p, nav.v_n, out.v_n, t, em);
    const Geodetic p_mid{0.5 * (nav.p.lon + out.p.lon), 0.5 * (nav.p.lat + out.p.lat),
                         0.5 * (nav.p.h + out.p.h)};
    const Vec3 w_in =
        earth_rate_n(p_mid.lat, em) + transport_rate(0.5 * (nav.v_n + out.v_n), p_mid, em);
    out.c_bn = attitude_update(nav.c_bn, dth1, dth2, w_in, t);
    return out;
}

inline std::vector<FilterOutput> run_filter(const std::vector<ImuSample>& imu,
                                            const std::vector<OdoSample>& odo,
                                            const FilterConfig& cfg, const InitialEstimate& init,
                                            const EarthModel& em = wgs84()) {
    if (imu.empty() || odo.size() < imu.size() + 1)
        throw StreamGap("IMU and odometer streams are not aligned");
    const double t_step = imu.size() > 1 ? imu[1].t - imu[0].t : cfg.update_interval;
    const int steps_per_update = static_cast<int>(std::lround(cfg.update_interval / t_step));
    if (steps_per_update < 1 ||
        std::abs(steps_per_update * t_step - cfg.update_interval) > 1e-9)
        throw InvalidConfig("update interval must be a multiple of the IMU interval");

    const bool aug = cfg.kind == MeasKind::PulseAccumulation;
    const int n = cfg.state_dim();

    NavState nav = init.nav;
    MountParams mount = init.mount;
    Vec3 bg = init.bg, ba = init.ba;

    const Eigen::VectorXd p0_diag = initial_covariance_diag(cfg, nav.p, mount.k, em);
    Eigen::MatrixXd p = p0_diag.asDiagonal();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    ModelBank bank;
    if (cfg.mmae) {
        const auto stds = cfg.mmae_stds.empty() ? default_model_bank(cfg.kind) : cfg.mmae_stds;
        bank = ModelBank::init(stds, p);
    }

    PulseVelKf kf = PulseVelKf::init(static_cast<double>(odo[0].n), cfg.q_jerk);

    Eigen::MatrixXd phi_acc = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd q_acc = Eigen::MatrixXd::Zero(n, n);
    PiWindow window;
    window.step_dt = t_step;
    double s_window_start = nav.s;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<FilterOutput> out;
    out.reserve(imu.size() / steps_per_update + 1);

    for (size_t k = 0; k < imu.size(); ++k) {
        if (k > 0 && std::abs(imu[k].t - imu[k - 1].t - t_step) > 0.5 * t_step)
            throw StreamGap("IMU stream gap at t=" + std::to_string(imu[k].t));
        if (std::abs(odo[k + 1].t - (imu[k].t + t_step)) > 0.5 * t_step)
            throw StreamGap("odometer stream gap at t=" + std::to_string(imu[k].t));

        const Vec3 dth1 = imu[k].dth1 - bg * (t_step / 2.0);
        const Vec3 dth2 = imu[k].dth2 - bg * (t_step / 2.0);
        const NavState state_k = nav;
        const Vec3 w_eb_k =
            omega_eb_b((dth1 + dth2) / t_step, state_k.c_nb(), earth_rate_n(state_k.p.lat, em));
        const Vec3 f_b_avg = (imu[k].dv1 + imu[k].dv2) / t_step - ba;

        const Eigen::MatrixXd f = f_matrix(state_k, mount, f_b_avg, w_eb_k, aug, em);
        const Eigen::MatrixXd qd = process_noise_step(state_k, mount, cfg, p0_diag, t_step);
        const Eigen::MatrixXd phi_k = Eigen::MatrixXd::Identity(n, n) + f * t_step;
        phi_acc = phi_k * phi_acc;
        q_acc = phi_k * q_acc * phi_k.transpose() + qd;

        // mechanize
        nav = mechanize_step(state_k, imu[k], bg, ba, t_step, em);
        nav.s = predict_pulse_count(state_k, mount.c_bm(), mount.k, dth1, dth2, state_k.v_n,
                                    nav.v_n, mount.l_b, t_step, em);
        if (!nav.v_n.allFinite() || !std::isfinite(nav.p.lat))
            throw CovarianceNotPD("navigation state diverged");

        if (cfg.kind == MeasKind::PulseIncrement) {
            window.m_rows.push_back(jac_sdot(state_k, mount, w_eb_k, em));
            window.h_rows.push_back(h_k_integrated(
                state_k, mount, {dth1, dth2, state_k.v_n, nav.v_n, t_step}, w_eb_k, em));
            if (cfg.meas.pi_exact_jacobian)
                window.phi_steps.push_back(phi_k);
        }
        if (cfg.kind == MeasKind::PulseVelocity)
            pv_prefilter_step(kf, static_cast<double>(odo[k + 1].n), t_step);

        if ((k + 1) % static_cast<size_t>(steps_per_update) != 0)
            continue;

        // ---- measurement update at the cadence boundary ----
        const double t_u = imu[k].t + t_step;
        if (cfg.mmae) {
            for (auto& mj : bank.models) {
                mj.p = phi_acc * mj.p * phi_acc.transpose() + q_acc;
                mj.p = 0.5 * (mj.p + mj.p.transpose());
            }
            check_psd(bank.models[0].p);
        } else {
            p = phi_acc * p * phi_acc.transpose() + q_acc;
            p = 0.5 * (p + p.transpose());
            check_psd(p);
        }

        MeasInputs in;
        in.w_eb_b = omega_eb_b((dth1 + dth2) / t_step, nav.c_nb(), earth_rate_n(nav.p.lat, em));
        const double inj_std = cfg.injected.std_at(t_u);
        const double inj = inj_std > 0.0 ? inj_std * gauss(rng) : 0.0;
        switch (cfg.kind) {
            case MeasKind::PulseAccumulation:
                in.n_accum = static_cast<double>(odo[k + 1].n) + inj;
                break;
            case MeasKind::PulseIncrement:
                in.dn_window =
                    static_cast<double>(odo[k + 1].n - odo[k + 1 - steps_per_update].n) + inj;
                in.window = &window;
                in.s_window_start = s_window_start;
                break;
            case MeasKind::PulseVelocity:
                in.sdot_hat = kf.s_dot_hat() + inj;
                break;
        }
        const MeasBundle bundle = measurement_bundle(cfg.kind, nav, mount, in, cfg.meas, em);

        // Indirect-filter residual: prediction minus observation, so the
        // positive Jacobian rows map the estimate-minus-truth state with a
        // positive sign. Reported innovations keep the observation-minus-
        // prediction orientation.
        FilterOutput row;
        row.t = t_u;
        if (cfg.mmae) {
            const MmaeResult res = mmae_step(bank, bundle.zhat, bundle.z, bundle.h, bundle.r);
            Eigen::VectorXd fused = res.x;
            feedback(nav, mount, bg, ba, fused);
            for (auto& mj : bank.models)
                mj.x.setZero();
            p = res.p;
            row.innovation = -res.innovation;
            row.adapted_std = res.adapted_std;
            row.weights.reserve(bank.models.size());
            for (const auto& mj : bank.models)
                row.weights.push_back(mj.weight);
        } else {
            Eigen::MatrixXd r = bundle.r;
            double eff_std = cfg.meas.odo_std;
            if (cfg.kind == MeasKind::PulseVelocity && cfg.gating) {
                const Eigen::VectorXd nu0 = bundle.zhat - bundle.z - bundle.h * x;
                r = gate(nu0, bundle.h * p * bundle.h.transpose() + r, cfg.meas, r);
                eff_std = std::sqrt(r(0, 0));
            }
            const UpdateResult res = update(x, p, bundle.zhat, bundle.z, bundle.h, r);
            x = res.x;
            p = res.p;
            check_psd(p);
            feedback(nav, mount, bg, ba, x);
            row.innovation = -res.innovation;
            row.adapted_std = eff_std;
        }

        row.nav = nav;
        row.mount = mount;
        row.bg = bg;
        row.ba = ba;
        row.cov_diag = p.diagonal();
        out.push_back(std::move(row));

        phi_acc.setIdentity();
        q_acc.setZero();
        window.clear();
        s_window_start = nav.s;
    }
    return out;
}

} // namespace insod
