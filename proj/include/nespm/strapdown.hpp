#pragma once

// Local-level NED strapdown navigation cycle and its exact inverse.

#include "nespm/attitude.hpp"
#include "nespm/earth_model.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

namespace nespm {

struct NavSolution
{
    GeodeticPosition pos;
    Eigen::Vector3d vel = Eigen::Vector3d::Zero(); // north, east, down [m/s]
    Dcm attitude = Dcm::Identity();                // C_b^n
};

/// One IMU interval (t - dt, t]. Rates are held constant across the interval.
struct ImuSample
{
    double t = 0.0;
    Eigen::Vector3d specific_force = Eigen::Vector3d::Zero(); // f_ib^b [m/s^2]
    Eigen::Vector3d angular_rate = Eigen::Vector3d::Zero();   // w_ib^b [rad/s]
    double dt = 0.0;
};

/// Intermediate quantities of one cycle, consumed by the linearized error model.
struct CycleDetail
{
    Dcm mid_attitude = Dcm::Identity();                           // C*_{b,k+1}^n
    Eigen::Vector3d earth_rate = Eigen::Vector3d::Zero();         // w_ie^n at k
    Eigen::Vector3d transport_rate = Eigen::Vector3d::Zero();     // w_en^n at k
    Eigen::Vector3d next_inertial_rate = Eigen::Vector3d::Zero(); // w_ie^n + w_en^n at k+1
    Eigen::Vector3d specific_force_nav = Eigen::Vector3d::Zero(); // C* f^b
};

namespace detail {

inline void validate(const ImuSample& imu)
{
    if (!(imu.dt > 0.0) || !std::isfinite(imu.dt))
    {
        throw DomainError("imu sample dt must be positive");
    }
    if (!imu.specific_force.allFinite() || !imu.angular_rate.allFinite())
    {
        throw DomainError("non-finite imu sample");
    }
}

} // namespace detail

/// Advances the navigation solution across one IMU interval.
///
/// Order of evaluation:
///  1. half-interval attitude C* = C_k exp([w*_nb] dt/2), w*_nb = w_ib - C_k^T (w_ie,k + w_en,k)
///  2. v_dot = C* f + g(k) - ([w_en,k] + 2[w_ie,k]) v_k, v_{k+1} = v_k + v_dot dt
///  3. trapezoidal altitude, latitude and longitude
///  4. C_{k+1} = C_k exp([w_nb] dt), w_nb = w_ib - C_k^T (w_ie,k+1 + w_en,k+1), re-orthonormalized
inline NavSolution na_cycle(const NavSolution& s, const ImuSample& imu, const EarthParams& earth,
                            CycleDetail* detail = nullptr)
{
    detail::validate(imu);
    const double dt = imu.dt;
    const Dcm& c = s.attitude;
    const Eigen::Matrix3d c_nb = c.transpose();

    const Eigen::Vector3d w_ie = earth_rate_ned(s.pos.latitude, earth);
    const Eigen::Vector3d w_en = transport_rate(s.pos, s.vel, earth);

    const Eigen::Vector3d w_nb_mid = imu.angular_rate - c_nb * (w_ie + w_en);
    const Dcm c_mid = c * exp_so3(w_nb_mid * (dt / 2.0));

    const Eigen::Vector3d f_nav = c_mid * imu.specific_force;
    const Eigen::Vector3d v_dot = f_nav + gravity_ned(s.pos.latitude, s.pos.altitude, earth)
                                  - (w_en + 2.0 * w_ie).cross(s.vel);

    NavSolution out;
    out.vel = s.vel + v_dot * dt;

    const auto [rn, re] = radii_of_curvature(s.pos.latitude, earth);
    const double h0 = s.pos.altitude;
    const double h1 = h0 - (out.vel.z() + s.vel.z()) * dt / 2.0;
    const double lat1 = s.pos.latitude + (s.vel.x() / (rn + h0) + out.vel.x() / (rn + h1)) * dt / 2.0;
    const double lon_rate0 = s.vel.y() / ((re + h0) * std::cos(s.pos.latitude));
    const double lon_rate1 = out.vel.y() / ((re + h1) * std::cos(lat1));
    out.pos = {lat1, wrap_longitude(s.pos.longitude + (lon_rate0 + lon_rate1) * dt / 2.0), h1};

    const Eigen::Vector3d w_in_next = earth_rate_ned(out.pos.latitude, earth)
                                      + transport_rate(out.pos, out.vel, earth);
    const Eigen::Vector3d w_nb = imu.angular_rate - c_nb * w_in_next;
    out.attitude = orthonormalize(c * exp_so3(w_nb * dt));

    if (detail != nullptr)
    {
        detail->mid_attitude = c_mid;
        detail->earth_rate = w_ie;
        detail->transport_rate = w_en;
        detail->next_inertial_rate = w_in_next;
        detail->specific_force_nav = f_nav;
    }
    return out;
}

/// Runs na_cycle over a sequence of samples and returns the final solution.
inline NavSolution na_propagate(NavSolution s, std::span<const ImuSample> samples, const EarthParams& earth)
{
    for (const auto& imu : samples)
    {
        s = na_cycle(s, imu, earth);
    }
    return s;
}

/// The IMU sample that takes `from` to `to` in one na_cycle of length dt.
///
/// Attitude and velocity are matched exactly; the position of `to` is only
/// used to evaluate the k+1 Earth and transport rates.
inline ImuSample inverse_na_cycle(const NavSolution& from, const NavSolution& to, double dt, double t,
                                  const EarthParams& earth)
{
    const Dcm& c = from.attitude;
    const Eigen::Matrix3d c_nb = c.transpose();
    const Eigen::Vector3d w_ie = earth_rate_ned(from.pos.latitude, earth);
    const Eigen::Vector3d w_en = transport_rate(from.pos, from.vel, earth);
    const Eigen::Vector3d w_in_next = earth_rate_ned(to.pos.latitude, earth)
                                      + transport_rate(to.pos, to.vel, earth);

    const Eigen::Vector3d w_nb = log_so3(c_nb * to.attitude) / dt;
    ImuSample imu;
    imu.t = t;
    imu.dt = dt;
    imu.angular_rate = w_nb + c_nb * w_in_next;

    const Eigen::Vector3d w_nb_mid = imu.angular_rate - c_nb * (w_ie + w_en);
    const Dcm c_mid = c * exp_so3(w_nb_mid * (dt / 2.0));
    const Eigen::Vector3d v_dot = (to.vel - from.vel) / dt;
    imu.specific_force = c_mid.transpose()
                         * (v_dot - gravity_ned(from.pos.latitude, from.pos.altitude, earth)
                            + (w_en + 2.0 * w_ie).cross(from.vel));
    return imu;
}

} // namespace nespm
