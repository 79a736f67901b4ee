#pragma once

// Horizontal-error evaluation measures over the portion of a run beyond a
// distance threshold (20 km by default).

#include <vector>

#include "insod/errors.hpp"
#include "insod/frames.hpp"

namespace insod {

struct ErrorSample {
    double dist{0.0}; // travelled distance, m
    double err{0.0};  // horizontal position error, m
    double t{0.0};
};

using ErrorSeries = std::vector<ErrorSample>;

struct MetricsReport {
    double mean20_abs{0.0}; // m
    double mean20_rel{0.0}; // permille of travelled distance
    double gra20_abs{0.0};  // m per m
    double gra20_rel{0.0};  // permille per m
    double max20{0.0};      // m
};

// Local-tangent-plane norm of the north/east displacement, evaluated at the
// midpoint so the result is symmetric in its arguments.
inline double horizontal_error(const Geodetic& a, const Geodetic& b,
                               const EarthModel& em = wgs84()) {
    const double lat_mid = 0.5 * (a.lat + b.lat);
    const double h_mid = 0.5 * (a.h + b.h);
    const auto [re, rn] = radii(lat_mid, em);
    const double dn = (a.lat - b.lat) * (rn + h_mid);
    const double de = wrap_pi(a.lon - b.lon) * (re + h_mid) * std::cos(lat_mid);
    return std::sqrt(dn * dn + de * de);
}

namespace detail {

inline void require_past(const ErrorSeries& series, double threshold, size_t min_count) {
    size_t count = 0;
    for (const auto& s : series)
        if (s.dist > threshold)
            ++count;
    if (count < min_count)
        throw InsufficientDistance("error series does not extend past the distance threshold");
}

} // namespace detail

inline std::pair<double, double> mean20(const ErrorSeries& series, double threshold = 20e3) {
    detail::require_past(series, threshold, 1);
    double sum_abs = 0.0, sum_rel = 0.0;
    long n = 0;
    for (const auto& s : series) {
        if (s.dist <= threshold)
            continue;
        sum_abs += std::abs(s.err);
        sum_rel += std::abs(s.err) / s.dist * 1000.0;
        ++n;
    }
    return {sum_abs / n, sum_rel / n};
}

// Least-squares slope of error vs distance (and of the permille relative
// error vs distance) past the threshold.
inline std::pair<double, double> gra20(const ErrorSeries& series, double threshold = 20e3) {
    detail::require_past(series, threshold, 2);
    double sx = 0.0, sy = 0.0, syr = 0.0;
    long n = 0;
    for (const auto& s : series) {
        if (s.dist <= threshold)
            continue;
        sx += s.dist;
        sy += std::abs(s.err);
        syr += std::abs(s.err) / s.dist * 1000.0;
        ++n;
    }
    const double mx = sx / n, my = sy / n, myr = syr / n;
    double sxx = 0.0, sxy = 0.0, sxyr = 0.0;
    for (const auto& s : series) {
        if (s.dist <= threshold)
            continue;
        const double dx = s.dist - mx;
        sxx += dx * dx;
        sxy += dx * (std::abs(s.err) - my);
        sxyr += dx * (std::abs(s.err) / s.dist * 1000.0 - myr);
    }
    if (sxx <= 0.0)
        throw InsufficientDistance("gradient needs distinct distances past the threshold");
    return {sxy / sxx, sxyr / sxx};
}

inline double max20(const ErrorSeries& series, double threshold = 20e3) {
    detail::require_past(series, threshold, 1);
    double m = 0.0;
    for (const auto& s : series)
        if (s.dist > threshold && std::abs(s.err) > m)
            m = std::abs(s.err);
    return m;
}

inline MetricsReport metrics_report(const ErrorSeries& series, double threshold = 20e3) {
    MetricsReport r;
    const auto [ma, mr] = mean20(series, threshold);
    const auto [ga, gr] = gra20(series, threshold);
    r.mean20_abs = ma;
    r.mean20_rel = mr;
    r.gra20_abs = ga;
    r.gra20_rel = gr;
    r.max20 = max20(series, threshold);
    return r;
}

} // namespace insod
