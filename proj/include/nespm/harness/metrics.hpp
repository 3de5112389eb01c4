#pragma once

#include "nespm/attitude.hpp"
#include "nespm/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>

namespace nespm::harness {

/// Root mean square of the velocity error norms.
inline double vrmse(std::span<const Eigen::Vector3d> estimated, std::span<const Eigen::Vector3d> truth)
{
    if (estimated.empty() || estimated.size() != truth.size())
    {
        throw DomainError("vrmse: empty or misaligned sequences");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < estimated.size(); ++i)
    {
        sum += (estimated[i] - truth[i]).squaredNorm();
    }
    return std::sqrt(sum / static_cast<double>(estimated.size()));
}

/// Quadratic mean of per-track values.
inline double rms_average(std::span<const double> per_track)
{
    if (per_track.empty())
    {
        throw DomainError("rms average: no tracks");
    }
    double sum = 0.0;
    for (double v : per_track)
    {
        sum += v * v;
    }
    return std::sqrt(sum / static_cast<double>(per_track.size()));
}

inline double vrmse_avg(std::span<const double> per_track) { return rms_average(per_track); }

/// Misalignment vector: Euler angles of C_est * C_truth^T.
inline Eigen::Vector3d misalignment_euler(const Dcm& estimated, const Dcm& truth)
{
    if (estimated == truth)
    {
        return Eigen::Vector3d::Zero();
    }
    const EulerAngles e = dcm_to_euler(estimated * truth.transpose());
    return {e.roll, e.pitch, e.yaw};
}

struct MrmseResult
{
    double value = 0.0;    // RMS of Euler misalignment vector norms [rad]
    double geodesic = 0.0; // RMS of rotation angles of the same matrices [rad]
    std::size_t used = 0;
    std::size_t excluded = 0; // gimbal-lock epochs
};

inline MrmseResult mrmse(std::span<const Dcm> estimated, std::span<const Dcm> truth)
{
    if (estimated.empty() || estimated.size() != truth.size())
    {
        throw DomainError("mrmse: empty or misaligned sequences");
    }
    MrmseResult r;
    double sum = 0.0;
    double sum_geo = 0.0;
    for (std::size_t i = 0; i < estimated.size(); ++i)
    {
        try
        {
            const Eigen::Vector3d m = misalignment_euler(estimated[i], truth[i]);
            sum += m.squaredNorm();
            sum_geo += attitude_minus(estimated[i], truth[i]).squaredNorm();
            ++r.used;
        }
        catch (const SingularityError&)
        {
            ++r.excluded;
        }
    }
    if (r.used == 0)
    {
        throw DomainError("mrmse: every epoch is at gimbal lock");
    }
    r.value = std::sqrt(sum / static_cast<double>(r.used));
    r.geodesic = std::sqrt(sum_geo / static_cast<double>(r.used));
    return r;
}

/// Percent improvement of `ours` over `baseline`, rounded to one decimal.
inline double improvement(double baseline, double ours)
{
    if (!(baseline > 0.0) || !std::isfinite(ours))
    {
        throw DomainError("improvement: baseline must be positive");
    }
    // + 0.0 folds a negative zero into +0.0
    return std::round(1000.0 * (baseline - ours) / baseline) / 10.0 + 0.0;
}

inline std::string format_percent(double percent)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", percent);
    return buf;
}

} // namespace nespm::harness
