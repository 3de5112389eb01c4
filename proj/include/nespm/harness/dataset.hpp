#pragma once

// CSV dataset streams:
//   IMU  t,fx,fy,fz,wx,wy,wz                      (s, m/s^2, rad/s)
//   DVL  t,vx,vy,vz                               (s, m/s body frame)
//   GT   t,lat,lon,h,vn,ve,vd,roll,pitch,yaw      (s, rad, rad, m, m/s, rad)

#include "nespm/attitude.hpp"
#include "nespm/errors.hpp"
#include "nespm/nespm_filter.hpp"
#include "nespm/strapdown.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace nespm::harness {

struct GroundTruthRecord
{
    double t = 0.0;
    GeodeticPosition pos;
    Eigen::Vector3d vel = Eigen::Vector3d::Zero();
    EulerAngles attitude;
};

inline NavSolution to_nav(const GroundTruthRecord& r)
{
    return {r.pos, r.vel, euler_to_dcm(r.attitude)};
}

inline GroundTruthRecord to_record(double t, const NavSolution& nav)
{
    return {t, nav.pos, nav.vel, dcm_to_euler(nav.attitude)};
}

inline constexpr std::string_view kImuHeader = "t,fx,fy,fz,wx,wy,wz";
inline constexpr std::string_view kDvlHeader = "t,vx,vy,vz";
inline constexpr std::string_view kGtHeader = "t,lat,lon,h,vn,ve,vd,roll,pitch,yaw";

struct Gap
{
    std::string stream;
    double from = 0.0;
    double to = 0.0;
};

struct DatasetInfo
{
    double imu_duration = 0.0; // s, sum of sample intervals
    double imu_rate = 0.0;     // Hz, from the median spacing
    double dvl_rate = 0.0;     // Hz, 0 when fewer than two DVL rows
    std::vector<Gap> gaps;
};

struct Dataset
{
    std::vector<GroundTruthRecord> gt;
    std::vector<ImuSample> imu;
    std::vector<DvlMeasurement> dvl;
    DatasetInfo info;
};

struct DatasetPaths
{
    std::string imu;
    std::string dvl; // empty: no DVL stream
    std::string gt;
};

struct LoadOptions
{
    double expected_rate_ratio = 100.0; // IMU:DVL, 0 disables the check
    double ratio_tolerance = 0.05;      // relative
    double gap_factor = 1.5;            // spacing above factor * median is a gap
};

namespace detail {

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::vector<double>> read_csv(const std::string& path, std::string_view header,
                                                 std::size_t columns)
{
    std::ifstream in(path);
    if (!in)
    {
        throw DataError("cannot open " + path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty())
        {
            continue;
        }
        if (!seen_header)
        {
            if (line != header)
            {
                throw ParseError(path, line_no, "expected header '" + std::string(header) + "'");
            }
            seen_header = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(columns);
        std::stringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ','))
        {
            errno = 0;
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v))
            {
                throw ParseError(path, line_no, "bad number '" + field + "'");
            }
            row.push_back(v);
        }
        if (row.size() != columns)
        {
            throw ParseError(path, line_no,
                             "expected " + std::to_string(columns) + " fields, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void require_increasing(const std::vector<double>& times, const std::string& stream)
{
    for (std::size_t i = 1; i < times.size(); ++i)
    {
        if (!(times[i] > times[i - 1]))
        {
            throw DataError(stream + ": non-monotone time at row " + std::to_string(i + 1) + " (t="
                            + format_double(times[i]) + ")");
        }
    }
}

inline double median_spacing(const std::vector<double>& times)
{
    std::vector<double> d;
    for (std::size_t i = 1; i < times.size(); ++i)
    {
        d.push_back(times[i] - times[i - 1]);
    }
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    return d[d.size() / 2];
}

inline void collect_gaps(const std::vector<double>& times, double spacing, double factor, const std::string& stream,
                         std::vector<Gap>& gaps)
{
    for (std::size_t i = 1; i < times.size(); ++i)
    {
        if (times[i] - times[i - 1] > factor * spacing)
        {
            gaps.push_back({stream, times[i - 1], times[i]});
        }
    }
}

} // namespace detail

inline std::vector<ImuSample> load_imu_csv(const std::string& path)
{
    const auto rows = detail::read_csv(path, kImuHeader, 7);
    if (rows.size() < 2)
    {
        throw DataError(path + ": at least two IMU rows are required");
    }
    std::vector<double> times;
    for (const auto& r : rows)
    {
        times.push_back(r[0]);
    }
    detail::require_increasing(times, path);
    std::vector<ImuSample> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        const auto& r = rows[i];
        ImuSample s;
        s.t = r[0];
        s.specific_force = {r[1], r[2], r[3]};
        s.angular_rate = {r[4], r[5], r[6]};
        s.dt = i == 0 ? rows[1][0] - rows[0][0] : r[0] - rows[i - 1][0];
        out.push_back(s);
    }
    return out;
}

inline std::vector<DvlMeasurement> load_dvl_csv(const std::string& path)
{
    const auto rows = detail::read_csv(path, kDvlHeader, 4);
    std::vector<double> times;
    std::vector<DvlMeasurement> out;
    for (const auto& r : rows)
    {
        times.push_back(r[0]);
        out.push_back({r[0], {r[1], r[2], r[3]}});
    }
    detail::require_increasing(times, path);
    return out;
}

inline std::vector<GroundTruthRecord> load_gt_csv(const std::string& path)
{
    const auto rows = detail::read_csv(path, kGtHeader, 10);
    std::vector<double> times;
    std::vector<GroundTruthRecord> out;
    for (const auto& r : rows)
    {
        times.push_back(r[0]);
        out.push_back({r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}, {r[7], r[8], r[9]}});
    }
    detail::require_increasing(times, path);
    if (out.empty())
    {
        throw DataError(path + ": ground truth is empty");
    }
    return out;
}

inline Dataset load_dataset(const DatasetPaths& paths, const LoadOptions& options = {})
{
    Dataset ds;
    ds.imu = load_imu_csv(paths.imu);
    if (!paths.dvl.empty())
    {
        ds.dvl = load_dvl_csv(paths.dvl);
    }
    ds.gt = load_gt_csv(paths.gt);

    std::vector<double> imu_t;
    for (const auto& s : ds.imu)
    {
        imu_t.push_back(s.t);
        ds.info.imu_duration += s.dt;
    }
    const double imu_spacing = detail::median_spacing(imu_t);
    ds.info.imu_rate = 1.0 / imu_spacing;
    detail::collect_gaps(imu_t, imu_spacing, options.gap_factor, "imu", ds.info.gaps);

    if (ds.dvl.size() >= 2)
    {
        std::vector<double> dvl_t;
        for (const auto& m : ds.dvl)
        {
            dvl_t.push_back(m.t);
        }
        const double dvl_spacing = detail::median_spacing(dvl_t);
        ds.info.dvl_rate = 1.0 / dvl_spacing;
        detail::collect_gaps(dvl_t, dvl_spacing, options.gap_factor, "dvl", ds.info.gaps);
        if (options.expected_rate_ratio > 0.0)
        {
            const double ratio = ds.info.imu_rate / ds.info.dvl_rate;
            if (std::abs(ratio - options.expected_rate_ratio) > options.ratio_tolerance * options.expected_rate_ratio)
            {
                throw DataError("imu/dvl rate ratio " + detail::format_double(ratio) + " differs from expected "
                                + detail::format_double(options.expected_rate_ratio));
            }
        }
    }
    return ds;
}

inline void write_imu_csv(const std::string& path, const std::vector<ImuSample>& imu)
{
    std::ofstream out(path);
    if (!out)
    {
        throw DataError("cannot write " + path);
    }
    out << kImuHeader << '\n';
    using detail::format_double;
    for (const auto& s : imu)
    {
        out << format_double(s.t) << ',' << format_double(s.specific_force.x()) << ','
            << format_double(s.specific_force.y()) << ',' << format_double(s.specific_force.z()) << ','
            << format_double(s.angular_rate.x()) << ',' << format_double(s.angular_rate.y()) << ','
            << format_double(s.angular_rate.z()) << '\n';
    }
}

inline void write_dvl_csv(const std::string& path, const std::vector<DvlMeasurement>& dvl)
{
    std::ofstream out(path);
    if (!out)
    {
        throw DataError("cannot write " + path);
    }
    out << kDvlHeader << '\n';
    using detail::format_double;
    for (const auto& m : dvl)
    {
        out << format_double(m.t) << ',' << format_double(m.velocity_body.x()) << ','
            << format_double(m.velocity_body.y()) << ',' << format_double(m.velocity_body.z()) << '\n';
    }
}

inline void write_gt_csv(const std::string& path, const std::vector<GroundTruthRecord>& gt)
{
    std::ofstream out(path);
    if (!out)
    {
        throw DataError("cannot write " + path);
    }
    out << kGtHeader << '\n';
    using detail::format_double;
    for (const auto& r : gt)
    {
        out << format_double(r.t) << ',' << format_double(r.pos.latitude) << ',' << format_double(r.pos.longitude)
            << ',' << format_double(r.pos.altitude) << ',' << format_double(r.vel.x()) << ','
            << format_double(r.vel.y()) << ',' << format_double(r.vel.z()) << ','
            << format_double(r.attitude.roll) << ',' << format_double(r.attitude.pitch) << ','
            << format_double(r.attitude.yaw) << '\n';
    }
}

} // namespace nespm::harness
