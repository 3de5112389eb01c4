#pragma once

// Rotation algebra on direction cosine matrices.
//
// A Dcm is stored body-to-navigation (C_b^n). Euler angles follow the
// intrinsic ZYX (yaw, pitch, roll) aerospace convention, so
// C_b^n = Rz(yaw) * Ry(pitch) * Rx(roll).
//
// Attitude errors are left (navigation-frame) increments:
//   attitude_plus(C, dpsi)  = exp(dpsi) * C
//   attitude_minus(C1, C2)  = log(C1 * C2^T)

#include "nespm/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nespm {

using Dcm = Eigen::Matrix3d;
using RotationVector = Eigen::Vector3d;

struct EulerAngles
{
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
};

/// Angles below this use Taylor expansions in exp/log.
inline constexpr double kSmallAngle = 1e-8;
/// log_so3 refuses rotations within this margin of pi.
inline constexpr double kNearPiMargin = 1e-6;
/// dcm_to_euler refuses pitch within this margin of +-pi/2.
inline constexpr double kGimbalMargin = 1e-6;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

inline Eigen::Vector3d unskew(const Eigen::Matrix3d& m)
{
    return {m(2, 1), m(0, 2), m(1, 0)};
}

/// Rodrigues' formula.
inline Dcm exp_so3(const RotationVector& theta)
{
    const double angle_sq = theta.squaredNorm();
    const double angle = std::sqrt(angle_sq);
    const Eigen::Matrix3d k = skew(theta);
    double a;
    double b;
    if (angle < kSmallAngle)
    {
        a = 1.0 - angle_sq / 6.0;
        b = 0.5 - angle_sq / 24.0;
    }
    else
    {
        a = std::sin(angle) / angle;
        b = (1.0 - std::cos(angle)) / angle_sq;
    }
    return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

inline RotationVector log_so3(const Dcm& c)
{
    if (!c.allFinite())
    {
        throw DomainError("log_so3: non-finite matrix");
    }
    const double cos_angle = std::clamp((c.trace() - 1.0) / 2.0, -1.0, 1.0);
    const Eigen::Vector3d axis_sin = 0.5 * unskew(c - c.transpose()); // sin(angle) * axis
    const double sin_angle = axis_sin.norm();
    const double angle = std::atan2(sin_angle, cos_angle);
    if (angle >= std::numbers::pi - kNearPiMargin)
    {
        throw SingularityError("log_so3: rotation angle too close to pi");
    }
    if (angle < kSmallAngle)
    {
        // angle/sin(angle) ~ 1 + angle^2/6
        return (1.0 + sin_angle * sin_angle / 6.0) * axis_sin;
    }
    return (angle / sin_angle) * axis_sin;
}

inline Dcm euler_to_dcm(const EulerAngles& e)
{
    const double cr = std::cos(e.roll), sr = std::sin(e.roll);
    const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
    const double cy = std::cos(e.yaw), sy = std::sin(e.yaw);
    Dcm c;
    c << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp, cp * sr, cp * cr;
    return c;
}

inline EulerAngles dcm_to_euler(const Dcm& c)
{
    const double sp = std::clamp(-c(2, 0), -1.0, 1.0);
    const double pitch = std::asin(sp);
    if (std::abs(pitch) > std::numbers::pi / 2.0 - kGimbalMargin)
    {
        throw SingularityError("dcm_to_euler: pitch at gimbal lock");
    }
    return {std::atan2(c(2, 1), c(2, 2)), pitch, std::atan2(c(1, 0), c(0, 0))};
}

inline Dcm attitude_plus(const Dcm& c, const RotationVector& dpsi)
{
    return exp_so3(dpsi) * c;
}

inline RotationVector attitude_minus(const Dcm& c1, const Dcm& c2)
{
    if (c1 == c2)
    {
        return RotationVector::Zero(); // C C^T is not bitwise identity
    }
    return log_so3(c1 * c2.transpose());
}

/// One symmetric (Newton) orthonormalization step: C <- C (3I - C^T C) / 2.
inline Dcm orthonormalize(const Dcm& c)
{
    return 0.5 * c * (3.0 * Eigen::Matrix3d::Identity() - c.transpose() * c);
}

inline double orthonormality_error(const Dcm& c)
{
    return (c.transpose() * c - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

} // namespace nespm
