#pragma once

// Sensor-error injection for clean datasets: initial velocity and attitude
// offsets, a constant bias per sensor axis, and white noise per sample.

#include "nespm/attitude.hpp"
#include "nespm/nespm_filter.hpp"
#include "nespm/strapdown.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace nespm::harness {

struct CorruptionSpec
{
    double init_vel_std_h = 0.25;        // m/s, north and east
    double init_vel_std_v = 0.05;        // m/s, down
    double misalignment_std_deg = 0.01;  // deg, per axis
    double accel_noise_std = 0.03;       // m/s^2 per sample
    double gyro_noise_std = 7.3e-6;      // rad/s per sample
    double accel_bias_std = 0.3;         // m/s^2
    double gyro_bias_std = 7.3e-5;       // rad/s
    double dvl_noise_std = 0.02;         // m/s per axis
    std::uint64_t seed = 1;

    static CorruptionSpec none()
    {
        CorruptionSpec s;
        s.init_vel_std_h = s.init_vel_std_v = s.misalignment_std_deg = 0.0;
        s.accel_noise_std = s.gyro_noise_std = s.accel_bias_std = s.gyro_bias_std = s.dvl_noise_std = 0.0;
        return s;
    }
};

struct CorruptedData
{
    NavSolution initial;
    std::vector<ImuSample> imu;
    std::vector<DvlMeasurement> dvl;
    Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero(); // injected
    Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();  // injected
    ErrorState initial_error;                             // truth minus initial solution
};

namespace detail {

class GaussianSource
{
public:
    explicit GaussianSource(std::uint64_t seed)
        : engine_(seed)
    {
    }

    /// Zero standard deviation consumes no random numbers and returns exact zeros.
    Eigen::Vector3d draw(const Eigen::Vector3d& stddev)
    {
        Eigen::Vector3d out = Eigen::Vector3d::Zero();
        for (int i = 0; i < 3; ++i)
        {
            if (stddev[i] > 0.0)
            {
                out[i] = stddev[i] * normal_(engine_);
            }
        }
        return out;
    }

    Eigen::Vector3d draw(double stddev) { return draw(Eigen::Vector3d::Constant(stddev)); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

} // namespace detail

/// Applies `spec` to clean streams. Measurements become truth + bias + noise;
/// the initial solution is truth with the drawn offsets removed, so that
/// v_true = v_init + dv and C_true = exp(dpsi) C_init.
inline CorruptedData corrupt(const NavSolution& truth0, std::span<const ImuSample> imu,
                             std::span<const DvlMeasurement> dvl, const CorruptionSpec& spec)
{
    detail::GaussianSource rng(spec.seed);
    CorruptedData out;

    const double mis_std = spec.misalignment_std_deg * std::numbers::pi / 180.0;
    out.initial_error.velocity = rng.draw(Eigen::Vector3d(spec.init_vel_std_h, spec.init_vel_std_h, spec.init_vel_std_v));
    out.initial_error.misalignment = rng.draw(mis_std);
    out.accel_bias = rng.draw(spec.accel_bias_std);
    out.gyro_bias = rng.draw(spec.gyro_bias_std);
    out.initial_error.accel_bias = out.accel_bias;
    out.initial_error.gyro_bias = out.gyro_bias;

    out.initial = truth0;
    if (!out.initial_error.velocity.isZero(0.0))
    {
        out.initial.vel = truth0.vel - out.initial_error.velocity;
    }
    if (!out.initial_error.misalignment.isZero(0.0))
    {
        out.initial.attitude = attitude_plus(truth0.attitude, -out.initial_error.misalignment);
    }

    const bool has_imu_error = spec.accel_noise_std > 0.0 || spec.gyro_noise_std > 0.0
                               || !out.accel_bias.isZero(0.0) || !out.gyro_bias.isZero(0.0);
    out.imu.assign(imu.begin(), imu.end());
    if (has_imu_error)
    {
        for (auto& s : out.imu)
        {
            s.specific_force += out.accel_bias + rng.draw(spec.accel_noise_std);
            s.angular_rate += out.gyro_bias + rng.draw(spec.gyro_noise_std);
        }
    }
    out.dvl.assign(dvl.begin(), dvl.end());
    if (spec.dvl_noise_std > 0.0)
    {
        for (auto& m : out.dvl)
        {
            m.velocity_body += rng.draw(spec.dvl_noise_std);
        }
    }
    return out;
}

} // namespace nespm::harness
