// Command-line front end: simulate -> fuse -> metrics pipelines, the
// verification suites, and the named experiment presets.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "insod/config.hpp"
#include "insod/csv.hpp"
#include "insod/fusion.hpp"
#include "insod/metrics.hpp"
#include "insod/verify.hpp"

namespace fs = std::filesystem;
using namespace insod;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitDivergence = 2;

struct CommonFlags {
    std::string config_path;
    std::string meas;
    bool mmae{false};
    std::int64_t seed{-1};
    std::string out;
};

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = flags.config_path.empty() ? RunConfig{} : load_config(flags.config_path);
    if (flags.config_path.empty())
        apply_kind_defaults(cfg.filter);
    if (!flags.meas.empty()) {
        cfg.filter.kind = meas_kind_from_string(flags.meas);
        apply_kind_defaults(cfg.filter);
    }
    if (flags.mmae)
        cfg.filter.mmae = true;
    if (flags.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(flags.seed);
        cfg.filter.seed = cfg.seed;
    }
    if (!flags.out.empty())
        cfg.out_dir = flags.out;
    return cfg;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

int cmd_simulate(const RunConfig& cfg) {
    ensure_out_dir(cfg.out_dir);
    const auto segments = config_segments(cfg);
    const auto truth =
        build_trajectory(segments, cfg.origin, cfg.heading0, cfg.sensors.imu_dt / 2.0, cfg.sensors);
    const auto imu = imu_from_truth(truth, cfg.sensors, cfg.seed);
    const auto odo = encode_odometer(truth, cfg.sensors, 2);

    csv::write_truth(fs::path(cfg.out_dir) / "truth.csv", truth, 2);
    csv::write_imu(fs::path(cfg.out_dir) / "imu.csv", imu);
    csv::write_odo(fs::path(cfg.out_dir) / "odo.csv", odo);
    std::printf("simulate: %zu IMU steps, %.1f km, wrote %s/{truth,imu,odo}.csv\n", imu.size(),
                truth.back().d / 1000.0, cfg.out_dir.c_str());
    return kExitOk;
}

int cmd_fuse(const RunConfig& cfg, const std::string& imu_path, const std::string& odo_path,
             const std::string& truth_path) {
    ensure_out_dir(cfg.out_dir);
    const auto imu = csv::read_imu(imu_path);
    const auto odo = csv::read_odo(odo_path);
    std::vector<TruthSample> truth;
    if (!truth_path.empty())
        truth = csv::read_truth(truth_path);

    // the initial navigation state comes from the configured trajectory start
    const auto segments = config_segments(cfg);
    const auto head = build_trajectory(segments, cfg.origin, cfg.heading0,
                                       cfg.sensors.imu_dt / 2.0, cfg.sensors);
    const InitialEstimate init =
        make_initial_estimate(head.front(), cfg.sensors, cfg.filter, cfg.seed, cfg.perturb_init);

    const auto out = run_filter(imu, odo, cfg.filter, init);

    const double t_step = cfg.sensors.imu_dt;
    std::vector<csv::ResultRow> rows;
    rows.reserve(out.size());
    for (const auto& r : out) {
        csv::ResultRow row{};
        row.t = r.t;
        const long idx = std::lround(r.t / t_step);
        const bool have_truth = idx >= 0 && idx < static_cast<long>(truth.size()) &&
                                std::abs(truth[idx].t - r.t) < 1e-6;
        if (have_truth) {
            const auto& ref = truth[idx];
            const auto [re, rn] = radii(ref.p.lat);
            row.err_n = (r.nav.p.lat - ref.p.lat) * (rn + ref.p.h);
            row.err_e = wrap_pi(r.nav.p.lon - ref.p.lon) * (re + ref.p.h) * std::cos(ref.p.lat);
            row.err_h = r.nav.p.h - ref.p.h;
            row.herr = horizontal_error(r.nav.p, ref.p);
            row.dist = ref.d;
        } else {
            row.err_n = row.err_e = row.err_h = row.herr =
                std::numeric_limits<double>::quiet_NaN();
            row.dist = r.nav.s / r.mount.k;
        }
        row.k_hat = r.mount.k;
        row.psi_hat = r.mount.psi;
        row.theta_hat = r.mount.theta;
        row.lever = r.mount.l_b;
        row.bg = r.bg;
        row.ba = r.ba;
        row.adapted_std = r.adapted_std;
        row.weights = r.weights;
        rows.push_back(row);
    }
    csv::write_results(fs::path(cfg.out_dir) / "results.csv", rows);
    std::printf("fuse: %s, %zu updates, wrote %s/results.csv\n", meas_kind_name(cfg.filter.kind),
                rows.size(), cfg.out_dir.c_str());
    return kExitOk;
}

int cmd_metrics(const std::string& results_path, const std::string& out_dir, double threshold_km) {
    const ErrorSeries series = csv::read_results_errors(results_path);
    const MetricsReport rep = metrics_report(series, threshold_km * 1000.0);
    std::printf("%-12s %-12s %-12s %-14s %-10s\n", "Mean20(m)", "Mean20(o/oo)", "Gra20(m/m)",
                "Gra20(o/oo/m)", "Max20(m)");
    std::printf("%-12.4g %-12.4g %-12.4g %-14.4g %-10.4g\n", rep.mean20_abs, rep.mean20_rel,
                rep.gra20_abs, rep.gra20_rel, rep.max20);
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::ofstream out(fs::path(out_dir) / "metrics.csv");
        out << "mean20_abs_m,mean20_rel_permille,gra20_abs,gra20_rel_permille_per_m,max20_m\n";
        out << csv::fmt(rep.mean20_abs) << ',' << csv::fmt(rep.mean20_rel) << ','
            << csv::fmt(rep.gra20_abs) << ',' << csv::fmt(rep.gra20_rel) << ','
            << csv::fmt(rep.max20) << "\n";
    }
    return kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
    std::vector<CheckResult> results;
    if (suite == "lemmas")
        results = verify_lemmas(seed);
    else if (suite == "jacobians")
        results = verify_jacobians(seed);
    else if (suite == "integrals")
        results = verify_integrals(seed);
    else if (suite == "prefilter")
        results = verify_prefilter(seed);
    else
        throw InvalidConfig("unknown verify suite '" + suite + "'");

    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("%s %s measured=%.6g bounds=[%.6g, %.6g]\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.measured, r.lo, r.hi);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? kExitOk : kExitValidation;
}

NoiseSchedule preset_noise_schedule(MeasKind kind) {
    NoiseSchedule s;
    if (kind == MeasKind::PulseVelocity)
        s.windows = {{0.0, 1000.0, 0.5}, {1000.0, 3000.0, 5.0}, {3000.0, 5000.0, 20.0}};
    else
        s.windows = {{0.0, 1000.0, 0.5}, {1000.0, 3000.0, 2.0}, {3000.0, 5000.0, 5.0}};
    return s;
}

int cmd_experiment(const std::string& preset, CommonFlags flags) {
    RunConfig cfg = resolve_config(flags);
    if (preset == "sim-baseline") {
        // clean reference run with the configured measurement kind
    } else if (preset == "sim-mmae") {
        cfg.filter.injected = preset_noise_schedule(cfg.filter.kind);
        cfg.filter.mmae = true;
        if (cfg.filter.mmae_stds.empty())
            cfg.filter.mmae_stds = extended_model_bank(cfg.filter.kind);
        cfg.filter.gating = false;
    } else {
        throw InvalidConfig("unknown experiment preset '" + preset + "'");
    }

    int rc = cmd_simulate(cfg);
    if (rc != kExitOk)
        return rc;
    const fs::path dir(cfg.out_dir);
    rc = cmd_fuse(cfg, dir / "imu.csv", dir / "odo.csv", dir / "truth.csv");
    if (rc != kExitOk)
        return rc;
    return cmd_metrics(dir / "results.csv", cfg.out_dir, 20.0);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"INS/odometer land-navigation simulator and fusion pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* sim = app.add_subcommand("simulate", "generate truth.csv, imu.csv and odo.csv");
    sim->add_option("--config", flags.config_path, "JSON config file");
    sim->add_option("--seed", flags.seed, "override RNG seed");
    sim->add_option("--out", flags.out, "output directory");

    std::string imu_path, odo_path, truth_path;
    auto* fuse = app.add_subcommand("fuse", "run the error-state filter over sensor CSVs");
    fuse->add_option("--config", flags.config_path, "JSON config file");
    fuse->add_option("--imu", imu_path, "imu.csv path")->required();
    fuse->add_option("--odo", odo_path, "odo.csv path")->required();
    fuse->add_option("--truth", truth_path, "truth.csv path (enables error columns)");
    fuse->add_option("--meas", flags.meas, "measurement kind: pa|pi|pv");
    fuse->add_flag("--mmae", flags.mmae, "enable the MMAE bank");
    fuse->add_option("--seed", flags.seed, "override RNG seed");
    fuse->add_option("--out", flags.out, "output directory");

    std::string suite;
    std::int64_t verify_seed = 1;
    auto* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("--suite", suite, "lemmas|jacobians|integrals|prefilter")->required();
    verify->add_option("--seed", verify_seed, "RNG seed");

    std::string results_path, metrics_out;
    double threshold_km = 20.0;
    auto* metrics = app.add_subcommand("metrics", "evaluation measures over results.csv");
    metrics->add_option("results", results_path, "results.csv path")->required();
    metrics->add_option("--out", metrics_out, "directory for metrics.csv");
    metrics->add_option("--threshold-km", threshold_km, "distance threshold (default 20)");

    std::string preset;
    auto* experiment = app.add_subcommand("experiment", "simulate + fuse + metrics presets");
    experiment->add_option("--preset", preset, "sim-baseline|sim-mmae")->required();
    experiment->add_option("--config", flags.config_path, "JSON config file");
    experiment->add_option("--meas", flags.meas, "measurement kind: pa|pi|pv");
    experiment->add_option("--seed", flags.seed, "override RNG seed");
    experiment->add_option("--out", flags.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(resolve_config(flags));
        if (fuse->parsed())
            return cmd_fuse(resolve_config(flags), imu_path, odo_path, truth_path);
        if (verify->parsed())
            return cmd_verify(suite, static_cast<std::uint64_t>(verify_seed));
        if (metrics->parsed())
            return cmd_metrics(results_path, metrics_out, threshold_km);
        if (experiment->parsed())
            return cmd_experiment(preset, flags);
    } catch (const CovarianceNotPD& e) {
        std::fprintf(stderr, "numerical divergence: %s\n", e.what());
        return kExitDivergence;
    } catch (const SingularInnovationCovariance& e) {
        std::fprintf(stderr, "numerical divergence: %s\n", e.what());
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitOk;
}
