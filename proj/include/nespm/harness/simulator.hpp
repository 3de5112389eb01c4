#pragma once

// Synthetic AUV trajectories with error-free IMU and DVL streams.
//
// The vehicle moves along its body x axis. Segment rates (yaw rate, pitch
// rate, forward acceleration) blend linearly into each other over `ramp`
// seconds, roll follows the coordinated-turn angle, and the kinematics are
// integrated on a sub-sampled grid. IMU samples are the exact inverse of the
// navigation cycle between consecutive ground-truth epochs.

#include "nespm/attitude.hpp"
#include "nespm/earth_model.hpp"
#include "nespm/errors.hpp"
#include "nespm/harness/dataset.hpp"
#include "nespm/nespm_filter.hpp"
#include "nespm/strapdown.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace nespm::harness {

struct Segment
{
    double duration = 0.0;   // s
    double yaw_rate = 0.0;   // rad/s
    double pitch_rate = 0.0; // rad/s
    double accel = 0.0;      // forward acceleration, m/s^2
};

struct TrajectorySpec
{
    GeodeticPosition start{32.8 * std::numbers::pi / 180.0, 34.95 * std::numbers::pi / 180.0, -20.0};
    double initial_speed = 2.0; // m/s
    double initial_yaw = 0.0;   // rad
    double initial_pitch = 0.0; // rad
    std::vector<Segment> segments;
    double imu_rate = 100.0; // Hz
    double dvl_rate = 1.0;   // Hz
    double ramp = 1.0;       // s
    int substeps = 10;
    bool coordinated_roll = true;
    EarthParams earth = EarthParams::wgs84();

    double duration() const
    {
        double d = 0.0;
        for (const auto& s : segments)
        {
            d += s.duration;
        }
        return d;
    }

    static TrajectorySpec stationary(double duration)
    {
        TrajectorySpec spec;
        spec.initial_speed = 0.0;
        spec.segments = {{duration}};
        return spec;
    }

    static TrajectorySpec straight(double duration, double speed, double yaw = 0.0)
    {
        TrajectorySpec spec;
        spec.initial_speed = speed;
        spec.initial_yaw = yaw;
        spec.segments = {{duration}};
        return spec;
    }

    /// Turns, a speed change and a dive, scaled to `duration` seconds.
    static TrajectorySpec maneuvering(double duration = 60.0, double speed = 2.0)
    {
        constexpr double deg = std::numbers::pi / 180.0;
        TrajectorySpec spec;
        spec.initial_speed = speed;
        spec.initial_yaw = 30.0 * deg;
        const double u = duration / 60.0;
        spec.segments = {
            {8.0 * u, 0.0, 0.0, 0.0},
            {10.0 * u, 6.0 * deg, 0.0, 0.0},
            {6.0 * u, 0.0, 0.0, 0.08},
            {8.0 * u, -8.0 * deg, 1.0 * deg, 0.0},
            {6.0 * u, 0.0, -1.0 * deg, -0.05},
            {12.0 * u, 5.0 * deg, 0.0, 0.0},
            {10.0 * u, -4.0 * deg, 0.0, 0.0},
        };
        return spec;
    }
};

struct SimulatedData
{
    std::vector<GroundTruthRecord> gt; // at t = 0, 1/imu_rate, ..., duration
    std::vector<ImuSample> imu;        // sample k covers (gt[k].t, gt[k+1].t]
    std::vector<DvlMeasurement> dvl;   // at multiples of 1/dvl_rate, excluding t = 0
};

namespace detail {

struct Rates
{
    double yaw = 0.0;
    double pitch = 0.0;
    double accel = 0.0;
};

inline Rates rates_at(const TrajectorySpec& spec, double t)
{
    Rates prev;
    double start = 0.0;
    for (const auto& seg : spec.segments)
    {
        const Rates target{seg.yaw_rate, seg.pitch_rate, seg.accel};
        if (t < start + seg.duration || &seg == &spec.segments.back())
        {
            const double blend = spec.ramp > 0.0 ? std::clamp((t - start) / spec.ramp, 0.0, 1.0) : 1.0;
            return {prev.yaw + blend * (target.yaw - prev.yaw), prev.pitch + blend * (target.pitch - prev.pitch),
                    prev.accel + blend * (target.accel - prev.accel)};
        }
        prev = target;
        start += seg.duration;
    }
    return prev;
}

struct Kinematics
{
    GeodeticPosition pos;
    double speed = 0.0;
    double yaw = 0.0;
    double pitch = 0.0;
};

inline EulerAngles attitude_of(const TrajectorySpec& spec, const Kinematics& k, double yaw_rate)
{
    double roll = 0.0;
    if (spec.coordinated_roll)
    {
        roll = std::atan(k.speed * yaw_rate / 9.80665);
    }
    return {roll, k.pitch, k.yaw};
}

inline Eigen::Vector3d velocity_of(const Kinematics& k)
{
    return k.speed * Eigen::Vector3d(std::cos(k.pitch) * std::cos(k.yaw), std::cos(k.pitch) * std::sin(k.yaw),
                                     -std::sin(k.pitch));
}

inline Eigen::Vector3d position_rate(const GeodeticPosition& pos, const Eigen::Vector3d& v, const EarthParams& earth)
{
    const auto [rn, re] = radii_of_curvature(pos.latitude, earth);
    return {v.x() / (rn + pos.altitude), v.y() / ((re + pos.altitude) * std::cos(pos.latitude)), -v.z()};
}

inline void validate(const TrajectorySpec& spec)
{
    if (spec.segments.empty())
    {
        throw ConfigError("trajectory: no segments");
    }
    for (const auto& s : spec.segments)
    {
        if (!(s.duration > 0.0) || !std::isfinite(s.yaw_rate) || !std::isfinite(s.pitch_rate)
            || !std::isfinite(s.accel))
        {
            throw ConfigError("trajectory: invalid segment");
        }
    }
    if (!(spec.imu_rate > 0.0) || !(spec.dvl_rate > 0.0) || spec.dvl_rate > spec.imu_rate)
    {
        throw ConfigError("trajectory: invalid sensor rates");
    }
    const double ratio = spec.imu_rate / spec.dvl_rate;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
    {
        throw ConfigError("trajectory: imu rate must be an integer multiple of the dvl rate");
    }
    if (spec.substeps < 1 || spec.initial_speed < 0.0)
    {
        throw ConfigError("trajectory: invalid integration settings");
    }
}

} // namespace detail

inline SimulatedData simulate_trajectory(const TrajectorySpec& spec)
{
    detail::validate(spec);
    const EarthParams& earth = spec.earth;
    const double dt = 1.0 / spec.imu_rate;
    const auto samples = static_cast<std::size_t>(std::llround(spec.duration() * spec.imu_rate));
    const auto dvl_every = static_cast<std::size_t>(std::llround(spec.imu_rate / spec.dvl_rate));
    const double h = dt / spec.substeps;

    detail::Kinematics k{spec.start, spec.initial_speed, spec.initial_yaw, spec.initial_pitch};
    SimulatedData out;
    out.gt.reserve(samples + 1);

    auto record = [&](double t) {
        const detail::Rates r = detail::rates_at(spec, t);
        out.gt.push_back({t, k.pos, detail::velocity_of(k), detail::attitude_of(spec, k, r.yaw)});
    };
    record(0.0);

    double t = 0.0;
    for (std::size_t i = 0; i < samples; ++i)
    {
        for (int j = 0; j < spec.substeps; ++j)
        {
            const double t0 = static_cast<double>(i) * dt + j * h;
            const double t1 = t0 + h;
            const detail::Rates r0 = detail::rates_at(spec, t0);
            const detail::Rates r1 = detail::rates_at(spec, t1);
            const Eigen::Vector3d v0 = detail::velocity_of(k);
            const Eigen::Vector3d p0 = detail::position_rate(k.pos, v0, earth);

            detail::Kinematics next = k;
            next.speed += 0.5 * (r0.accel + r1.accel) * h;
            next.yaw += 0.5 * (r0.yaw + r1.yaw) * h;
            next.pitch += 0.5 * (r0.pitch + r1.pitch) * h;
            if (next.speed < 0.0 || std::abs(next.pitch) > 80.0 * std::numbers::pi / 180.0)
            {
                throw ConfigError("trajectory: segment parameters drive speed negative or pitch beyond 80 deg");
            }
            // Heun step for the position.
            GeodeticPosition predicted{k.pos.latitude + p0.x() * h, k.pos.longitude + p0.y() * h,
                                       k.pos.altitude + p0.z() * h};
            const Eigen::Vector3d p1 = detail::position_rate(predicted, detail::velocity_of(next), earth);
            next.pos = {k.pos.latitude + 0.5 * (p0.x() + p1.x()) * h,
                        wrap_longitude(k.pos.longitude + 0.5 * (p0.y() + p1.y()) * h),
                        k.pos.altitude + 0.5 * (p0.z() + p1.z()) * h};
            k = next;
        }
        t = static_cast<double>(i + 1) * dt;
        record(t);
    }

    out.imu.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i)
    {
        out.imu.push_back(inverse_na_cycle(to_nav(out.gt[i]), to_nav(out.gt[i + 1]), dt, out.gt[i + 1].t, earth));
    }
    for (std::size_t i = dvl_every; i <= samples; i += dvl_every)
    {
        const NavSolution nav = to_nav(out.gt[i]);
        out.dvl.push_back({out.gt[i].t, nav.attitude.transpose() * nav.vel});
    }
    return out;
}

} // namespace nespm::harness
