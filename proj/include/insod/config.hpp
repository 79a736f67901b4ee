#pragma once

// Run configuration: one JSON document drives the simulate/fuse/metrics
// pipeline. Every field has the reference-experiment default; command-line
// flags override individual fields after parsing.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "insod/errors.hpp"
#include "insod/fusion.hpp"
#include "insod/trajsim.hpp"

namespace insod {

struct RunConfig {
    SensorSpec sensors{default_sensor_spec()};
    bool paper_trajectory{true};
    std::vector<SegmentSpec> segments{};
    Geodetic origin{default_origin()};
    double heading0{0.0};
    FilterConfig filter{};
    bool perturb_init{true};
    std::uint64_t seed{1};
    std::string out_dir{"."};
};

inline MeasKind meas_kind_from_string(const std::string& s) {
    if (s == "pa")
        return MeasKind::PulseAccumulation;
    if (s == "pi")
        return MeasKind::PulseIncrement;
    if (s == "pv")
        return MeasKind::PulseVelocity;
    throw InvalidConfig("filter.meas must be one of pa|pi|pv, got '" + s + "'");
}

inline const char* meas_kind_name(MeasKind k) {
    switch (k) {
        case MeasKind::PulseAccumulation:
            return "pa";
        case MeasKind::PulseIncrement:
            return "pi";
        case MeasKind::PulseVelocity:
            return "pv";
    }
    return "?";
}

// Measurement-noise defaults per kind: PA/PI use 1 pulse with the tighter NHC,
// PV uses 0.5 p/s with gating.
inline void apply_kind_defaults(FilterConfig& f) {
    switch (f.kind) {
        case MeasKind::PulseAccumulation:
            f.meas.odo_std = 1.0;
            f.meas.nhc_std = 0.02;
            f.gating = false;
            break;
        case MeasKind::PulseIncrement:
            f.meas.odo_std = 1.0;
            f.meas.nhc_std = 0.05;
            f.gating = false;
            break;
        case MeasKind::PulseVelocity:
            f.meas.odo_std = 0.5;
            f.meas.nhc_std = 0.05;
            f.gating = true;
            break;
    }
}

namespace detail {

inline SegmentSpec parse_segment(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const double dur = j.at("duration").get<double>();
    if (kind == "still")
        return SegmentSpec::still(dur);
    if (kind == "const_speed")
        return SegmentSpec::const_speed(dur, j.at("speed").get<double>());
    if (kind == "const_accel")
        return SegmentSpec::const_accel(dur, j.at("accel").get<double>());
    if (kind == "sine_accel")
        return SegmentSpec::sine_accel(dur, j.at("speed").get<double>());
    if (kind == "turn")
        return SegmentSpec::turn(dur, deg(j.at("angle_deg").get<double>()));
    throw InvalidConfig("unknown segment kind '" + kind + "'");
}

inline Vec3 parse_vec3(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3)
        throw InvalidConfig(field + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace detail

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig c;
    try {
        if (j.contains("seed"))
            c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out"))
            c.out_dir = j["out"].get<std::string>();

        if (j.contains("sensors")) {
            const auto& s = j["sensors"];
            auto& sp = c.sensors;
            if (s.contains("gyro_bias_deg_h"))
                sp.gyro_bias = Vec3::Constant(deg(s["gyro_bias_deg_h"].get<double>()) / 3600.0);
            if (s.contains("arw_deg_sqrt_h"))
                sp.arw = deg(s["arw_deg_sqrt_h"].get<double>()) / 60.0;
            if (s.contains("accel_bias_ug"))
                sp.accel_bias = Vec3::Constant(s["accel_bias_ug"].get<double>() * 1e-6 * 9.80665);
            if (s.contains("accel_nd_ug_sqrt_hz"))
                sp.accel_nd = s["accel_nd_ug_sqrt_hz"].get<double>() * 1e-6 * 9.80665;
            if (s.contains("scale_factor"))
                sp.k = s["scale_factor"].get<double>();
            if (s.contains("psi_deg"))
                sp.psi = deg(s["psi_deg"].get<double>());
            if (s.contains("theta_deg"))
                sp.theta = deg(s["theta_deg"].get<double>());
            if (s.contains("phi_deg"))
                sp.phi = deg(s["phi_deg"].get<double>());
            if (s.contains("lever"))
                sp.lever = detail::parse_vec3(s["lever"], "sensors.lever");
            if (s.contains("delta_p0"))
                sp.delta_p0 = s["delta_p0"].get<double>();
            if (s.contains("imu_dt"))
                sp.imu_dt = s["imu_dt"].get<double>();
            if (sp.k <= 0.0)
                throw InvalidConfig("sensors.scale_factor must be positive");
            if (sp.delta_p0 < 0.0 || sp.delta_p0 >= 1.0)
                throw InvalidConfig("sensors.delta_p0 must lie in [0, 1)");
            if (sp.imu_dt <= 0.0)
                throw InvalidConfig("sensors.imu_dt must be positive");
        }

        if (j.contains("trajectory")) {
            const auto& t = j["trajectory"];
            if (t.is_string()) {
                if (t.get<std::string>() != "paper_default")
                    throw InvalidConfig("trajectory string must be 'paper_default'");
                c.paper_trajectory = true;
            } else {
                c.paper_trajectory = false;
                if (t.contains("origin_deg")) {
                    const Vec3 o = detail::parse_vec3(t["origin_deg"], "trajectory.origin_deg");
                    c.origin = {deg(o(0)), deg(o(1)), o(2)};
                }
                if (t.contains("heading0_deg"))
                    c.heading0 = deg(t["heading0_deg"].get<double>());
                if (!t.contains("segments") || !t["segments"].is_array() || t["segments"].empty())
                    throw InvalidConfig("trajectory.segments must be a non-empty array");
                for (const auto& seg : t["segments"])
                    c.segments.push_back(detail::parse_segment(seg));
            }
        }

        // filter: kind defaults first, then explicit values
        if (j.contains("filter") && j["filter"].contains("meas"))
            c.filter.kind = meas_kind_from_string(j["filter"]["meas"].get<std::string>());
        apply_kind_defaults(c.filter);
        if (j.contains("filter")) {
            const auto& f = j["filter"];
            if (f.contains("update_interval"))
                c.filter.update_interval = f["update_interval"].get<double>();
            if (f.contains("odo_std"))
                c.filter.meas.odo_std = f["odo_std"].get<double>();
            if (f.contains("nhc_std"))
                c.filter.meas.nhc_std = f["nhc_std"].get<double>();
            if (f.contains("innovation_threshold"))
                c.filter.meas.innovation_threshold = f["innovation_threshold"].get<double>();
            if (f.contains("inflated_std"))
                c.filter.meas.inflated_std = f["inflated_std"].get<double>();
            if (f.contains("gating"))
                c.filter.gating = f["gating"].get<bool>();
            if (f.contains("pi_jacobian")) {
                const std::string mode = f["pi_jacobian"].get<std::string>();
                if (mode != "exact" && mode != "approx")
                    throw InvalidConfig("filter.pi_jacobian must be 'exact' or 'approx'");
                c.filter.meas.pi_exact_jacobian = mode == "exact";
            }
            if (f.contains("pi_window"))
                c.filter.meas.pi_window = f["pi_window"].get<int>();
            if (f.contains("mmae"))
                c.filter.mmae = f["mmae"].get<bool>();
            if (f.contains("mmae_stds"))
                c.filter.mmae_stds = f["mmae_stds"].get<std::vector<double>>();
            if (f.contains("q_jerk"))
                c.filter.q_jerk = f["q_jerk"].get<double>();
            if (f.contains("perturb_init"))
                c.perturb_init = f["perturb_init"].get<bool>();
            if (c.filter.meas.odo_std <= 0.0 || c.filter.meas.nhc_std <= 0.0)
                throw InvalidConfig("filter stds must be positive");
            if (c.filter.meas.inflated_std < c.filter.meas.odo_std)
                throw InvalidConfig("filter.inflated_std must be >= odo_std");
        }

        if (j.contains("noise_schedule")) {
            for (const auto& w : j["noise_schedule"])
                c.filter.injected.windows.push_back({w.at("start").get<double>(),
                                                     w.at("end").get<double>(),
                                                     w.at("std").get<double>()});
            c.filter.injected.validate();
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("config field error: ") + e.what());
    }

    c.filter.arw = c.sensors.arw;
    c.filter.vrw = c.sensors.accel_nd;
    c.filter.seed = c.seed;
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::vector<SegmentSpec> config_segments(const RunConfig& c) {
    return c.paper_trajectory ? default_paper_trajectory() : c.segments;
}

} // namespace insod
