#pragma once

// WGS84 Earth quantities used by the NED strapdown mechanization.

#include "nespm/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>

namespace nespm {

struct GeodeticPosition
{
    double latitude = 0.0;  // rad
    double longitude = 0.0; // rad, (-pi, pi]
    double altitude = 0.0;  // m, positive up
};

/// Wraps a longitude into (-pi, pi].
inline double wrap_longitude(double lon)
{
    constexpr double pi = std::numbers::pi;
    double wrapped = std::remainder(lon, 2.0 * pi);
    if (wrapped <= -pi)
    {
        wrapped += 2.0 * pi;
    }
    return wrapped;
}

struct EarthParams
{
    double semi_major_axis = 6378137.0;              // m
    double eccentricity_sq = 6.69437999014e-3;       // first eccentricity squared
    double rotation_rate = 7.292115e-5;              // rad/s
    double flattening = 1.0 / 298.257223563;
    double gravity_equator = 9.7803253359;           // m/s^2, normal gravity at the equator
    double somigliana_k = 0.00193185265241;          // (b*gamma_p)/(a*gamma_e) - 1
    double gm = 3.986004418e14;                      // m^3/s^2

    bool earth_rate_enabled = true;
    bool transport_rate_enabled = true;
    /// Replaces the normal-gravity model with [0, 0, value] (test mode). Zero disables gravity.
    std::optional<double> gravity_override;

    static EarthParams wgs84() { return {}; }

    /// Earth with rotation and transport rate disabled and constant down gravity.
    static EarthParams test_mode(double gravity = 9.80665)
    {
        EarthParams p;
        p.earth_rate_enabled = false;
        p.transport_rate_enabled = false;
        p.gravity_override = gravity;
        return p;
    }
};

struct CurvatureRadii
{
    double meridian;   // R_n
    double transverse; // R_e
};

namespace detail {

inline void require_finite(double v, const char* what)
{
    if (!std::isfinite(v))
    {
        throw DomainError(std::string("non-finite ") + what);
    }
}

inline void require_latitude(double lat)
{
    require_finite(lat, "latitude");
    if (std::abs(lat) > std::numbers::pi / 2.0 + 1e-12)
    {
        throw DomainError("latitude outside [-pi/2, pi/2]");
    }
}

} // namespace detail

inline CurvatureRadii radii_of_curvature(double latitude, const EarthParams& earth = {})
{
    detail::require_latitude(latitude);
    const double s = std::sin(latitude);
    const double denom = 1.0 - earth.eccentricity_sq * s * s;
    const double sqrt_denom = std::sqrt(denom);
    return {earth.semi_major_axis * (1.0 - earth.eccentricity_sq) / (denom * sqrt_denom),
            earth.semi_major_axis / sqrt_denom};
}

/// Somigliana normal gravity with the WGS84 second-order free-air correction, NED (down positive).
inline Eigen::Vector3d gravity_ned(double latitude, double altitude, const EarthParams& earth = {})
{
    detail::require_latitude(latitude);
    detail::require_finite(altitude, "altitude");
    if (earth.gravity_override)
    {
        return {0.0, 0.0, *earth.gravity_override};
    }
    const double s2 = std::sin(latitude) * std::sin(latitude);
    const double g0 = earth.gravity_equator * (1.0 + earth.somigliana_k * s2)
                      / std::sqrt(1.0 - earth.eccentricity_sq * s2);
    const double a = earth.semi_major_axis;
    const double omega = earth.rotation_rate;
    const double b = a * (1.0 - earth.flattening);
    const double m = omega * omega * a * a * b / earth.gm;
    const double h = altitude;
    const double g = g0
                     * (1.0 - 2.0 / a * (1.0 + earth.flattening + m - 2.0 * earth.flattening * s2) * h
                        + 3.0 / (a * a) * h * h);
    return {0.0, 0.0, g};
}

inline Eigen::Vector3d earth_rate_ned(double latitude, const EarthParams& earth = {})
{
    detail::require_latitude(latitude);
    if (!earth.earth_rate_enabled)
    {
        return Eigen::Vector3d::Zero();
    }
    return earth.rotation_rate * Eigen::Vector3d(std::cos(latitude), 0.0, -std::sin(latitude));
}

/// Latitudes closer than this to a pole make the transport rate singular.
inline constexpr double kPoleExclusion = 1e-9;

inline Eigen::Vector3d transport_rate(const GeodeticPosition& pos, const Eigen::Vector3d& v_ned,
                                      const EarthParams& earth = {})
{
    detail::require_latitude(pos.latitude);
    detail::require_finite(pos.altitude, "altitude");
    if (!v_ned.allFinite())
    {
        throw DomainError("non-finite velocity");
    }
    if (!earth.transport_rate_enabled)
    {
        return Eigen::Vector3d::Zero();
    }
    if (std::numbers::pi / 2.0 - std::abs(pos.latitude) < kPoleExclusion)
    {
        throw SingularityError("transport rate undefined at the pole");
    }
    const auto [rn, re] = radii_of_curvature(pos.latitude, earth);
    const double east_radius = re + pos.altitude;
    return {v_ned.y() / east_radius, -v_ned.x() / (rn + pos.altitude),
            -v_ned.y() * std::tan(pos.latitude) / east_radius};
}

/// d(transport_rate)/d(v_ned), the 3x3 sensitivity used by the linearized error model.
inline Eigen::Matrix3d transport_rate_jacobian(const GeodeticPosition& pos, const EarthParams& earth = {})
{
    Eigen::Matrix3d n = Eigen::Matrix3d::Zero();
    if (!earth.transport_rate_enabled)
    {
        return n;
    }
    const auto [rn, re] = radii_of_curvature(pos.latitude, earth);
    const double east_radius = re + pos.altitude;
    n(0, 1) = 1.0 / east_radius;
    n(1, 0) = -1.0 / (rn + pos.altitude);
    n(2, 1) = -std::tan(pos.latitude) / east_radius;
    return n;
}

} // namespace nespm
