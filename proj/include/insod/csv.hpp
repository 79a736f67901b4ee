#pragma once

// CSV schemas for the simulator and filter pipelines. All files are UTF-8,
// comma-separated, one header row, '\n' line endings, full-precision decimal
// floats. Readers validate the header and abort with the offending line number
// on any malformed record.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "insod/errors.hpp"
#include "insod/fusion.hpp"
#include "insod/metrics.hpp"
#include "insod/trajsim.hpp"

namespace insod {
namespace csv {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& field, long line) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0')
        throw SchemaError("malformed numeric field '" + field + "'", line);
    return v;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path);
    return out;
}

inline void expect_header(std::ifstream& in, const std::string& expected,
                          const std::string& path) {
    std::string line;
    if (!std::getline(in, line))
        throw SchemaError("missing header in " + path, 1);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != expected)
        throw SchemaError("unexpected header in " + path + ": '" + line + "'", 1);
}

} // namespace detail

// --- truth.csv: t,lon,lat,h,vn,vu,ve,q0,q1,q2,q3,d ------------------------------

inline const char* kTruthHeader = "t,lon,lat,h,vn,vu,ve,q0,q1,q2,q3,d";

inline void write_truth(const std::string& path, const std::vector<TruthSample>& truth,
                        long stride = 1) {
    auto out = detail::open_out(path);
    out << kTruthHeader << "\n";
    for (size_t i = 0; i < truth.size(); i += stride) {
        const auto& s = truth[i];
        Eigen::Quaterniond q(s.c_bn);
        q.normalize();
        if (q.w() < 0.0)
            q.coeffs() = -q.coeffs();
        out << fmt(s.t) << ',' << fmt(s.p.lon) << ',' << fmt(s.p.lat) << ',' << fmt(s.p.h) << ','
            << fmt(s.v_n(0)) << ',' << fmt(s.v_n(1)) << ',' << fmt(s.v_n(2)) << ',' << fmt(q.w())
            << ',' << fmt(q.x()) << ',' << fmt(q.y()) << ',' << fmt(q.z()) << ',' << fmt(s.d)
            << "\n";
    }
}

// Reads position/velocity/attitude/distance; body rates and specific force are
// not part of the schema and come back zero.
inline std::vector<TruthSample> read_truth(const std::string& path) {
    auto in = detail::open_in(path);
    detail::expect_header(in, kTruthHeader, path);
    std::vector<TruthSample> out;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto f = detail::split(line);
        if (f.size() != 12)
            throw SchemaError("expected 12 fields in truth record", lineno);
        TruthSample s;
        s.t = detail::parse_double(f[0], lineno);
        s.p = {detail::parse_double(f[1], lineno), detail::parse_double(f[2], lineno),
               detail::parse_double(f[3], lineno)};
        s.v_n = {detail::parse_double(f[4], lineno), detail::parse_double(f[5], lineno),
                 detail::parse_double(f[6], lineno)};
        const Eigen::Quaterniond q(detail::parse_double(f[7], lineno),
                                   detail::parse_double(f[8], lineno),
                                   detail::parse_double(f[9], lineno),
                                   detail::parse_double(f[10], lineno));
        s.c_bn = q.normalized().toRotationMatrix();
        s.d = detail::parse_double(f[11], lineno);
        out.push_back(s);
    }
    return out;
}

// --- imu.csv: t + two angle increments + two velocity increments -----------------

inline const char* kImuHeader =
    "t,dth1x,dth1y,dth1z,dth2x,dth2y,dth2z,dv1x,dv1y,dv1z,dv2x,dv2y,dv2z";

inline void write_imu(const std::string& path, const std::vector<ImuSample>& imu) {
    auto out = detail::open_out(path);
    out << kImuHeader << "\n";
    for (const auto& s : imu) {
        out << fmt(s.t);
        const Vec3* vecs[4] = {&s.dth1, &s.dth2, &s.dv1, &s.dv2};
        for (const Vec3* v : vecs)
            for (int i = 0; i < 3; ++i)
                out << ',' << fmt((*v)(i));
        out << "\n";
    }
}

inline std::vector<ImuSample> read_imu(const std::string& path) {
    auto in = detail::open_in(path);
    detail::expect_header(in, kImuHeader, path);
    std::vector<ImuSample> out;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto f = detail::split(line);
        if (f.size() != 13)
            throw SchemaError("expected 13 fields in IMU record", lineno);
        ImuSample s;
        s.t = detail::parse_double(f[0], lineno);
        Vec3* vecs[4] = {&s.dth1, &s.dth2, &s.dv1, &s.dv2};
        int idx = 1;
        for (Vec3* v : vecs)
            for (int i = 0; i < 3; ++i)
                (*v)(i) = detail::parse_double(f[idx++], lineno);
        out.push_back(s);
    }
    return out;
}

// --- odo.csv: t,N -----------------------------------------------------------------

inline const char* kOdoHeader = "t,N";

inline void write_odo(const std::string& path, const std::vector<OdoSample>& odo) {
    auto out = detail::open_out(path);
    out << kOdoHeader << "\n";
    for (const auto& s : odo)
        out << fmt(s.t) << ',' << s.n << "\n";
}

inline std::vector<OdoSample> read_odo(const std::string& path) {
    auto in = detail::open_in(path);
    detail::expect_header(in, kOdoHeader, path);
    std::vector<OdoSample> out;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto f = detail::split(line);
        if (f.size() != 2)
            throw SchemaError("expected 2 fields in odometer record", lineno);
        OdoSample s;
        s.t = detail::parse_double(f[0], lineno);
        char* end = nullptr;
        s.n = std::strtoll(f[1].c_str(), &end, 10);
        if (end == f[1].c_str() || *end != '\0')
            throw SchemaError("malformed pulse count '" + f[1] + "'", lineno);
        out.push_back(s);
    }
    return out;
}

// --- results.csv --------------------------------------------------------------------

inline std::string results_header(size_t n_weights) {
    std::string h =
        "t,err_n,err_e,err_h,herr,dist,K_hat,psi_hat,theta_hat,lx,ly,lz,bgx,bgy,bgz,bax,bay,baz,"
        "adapted_std";
    for (size_t i = 1; i <= n_weights; ++i)
        h += ",w" + std::to_string(i);
    return h;
}

struct ResultRow {
    double t, err_n, err_e, err_h, herr, dist;
    double k_hat, psi_hat, theta_hat;
    Vec3 lever, bg, ba;
    double adapted_std;
    std::vector<double> weights;
};

inline void write_results(const std::string& path, const std::vector<ResultRow>& rows) {
    auto out = detail::open_out(path);
    const size_t nw = rows.empty() ? 0 : rows.front().weights.size();
    out << results_header(nw) << "\n";
    for (const auto& r : rows) {
        out << fmt(r.t) << ',' << fmt(r.err_n) << ',' << fmt(r.err_e) << ',' << fmt(r.err_h) << ','
            << fmt(r.herr) << ',' << fmt(r.dist) << ',' << fmt(r.k_hat) << ',' << fmt(r.psi_hat)
            << ',' << fmt(r.theta_hat);
        for (int i = 0; i < 3; ++i)
            out << ',' << fmt(r.lever(i));
        for (int i = 0; i < 3; ++i)
            out << ',' << fmt(r.bg(i));
        for (int i = 0; i < 3; ++i)
            out << ',' << fmt(r.ba(i));
        out << ',' << fmt(r.adapted_std);
        for (double w : r.weights)
            out << ',' << fmt(w);
        out << "\n";
    }
}

// Reads back the columns needed by the metrics command: t, herr, dist.
inline ErrorSeries read_results_errors(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw SchemaError("missing header in " + path, 1);
    const auto header = detail::split(line);
    int i_t = -1, i_herr = -1, i_dist = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "t")
            i_t = static_cast<int>(i);
        if (header[i] == "herr")
            i_herr = static_cast<int>(i);
        if (header[i] == "dist")
            i_dist = static_cast<int>(i);
    }
    if (i_t < 0 || i_herr < 0 || i_dist < 0)
        throw SchemaError("results header lacks t/herr/dist in " + path, 1);
    ErrorSeries out;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto f = detail::split(line);
        if (f.size() != header.size())
            throw SchemaError("field count mismatch in results record", lineno);
        ErrorSample s;
        s.t = detail::parse_double(f[i_t], lineno);
        s.err = detail::parse_double(f[i_herr], lineno);
        s.dist = detail::parse_double(f[i_dist], lineno);
        out.push_back(s);
    }
    return out;
}

} // namespace csv
} // namespace insod
