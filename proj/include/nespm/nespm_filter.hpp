#pragma once

// INS/DVL error-state UKF whose sigma points are propagated through the
// strapdown navigation cycle.
//
// Error-state convention: a sigma point describes a hypothesis of the true
// state relative to the navigation solution,
//   v_true = v_nav + dv,   C_true = exp(dpsi) C_nav,
// and carries absolute sensor biases, removed from raw IMU data as
//   f* = f - b_a,   w* = w - b_g.

#include "nespm/attitude.hpp"
#include "nespm/earth_model.hpp"
#include "nespm/errors.hpp"
#include "nespm/strapdown.hpp"
#include "nespm/ukf.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nespm {

inline constexpr int kErrorDim = 12;
using ErrorVector = ukf::Vector<kErrorDim>;
using ErrorCov = ukf::Matrix<kErrorDim>;

struct ErrorState
{
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();     // dv^n [m/s]
    RotationVector misalignment = RotationVector::Zero();   // dpsi^n [rad]
    Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();   // b_a, body [m/s^2]
    Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();    // b_g, body [rad/s]

    ErrorVector to_vector() const
    {
        ErrorVector x;
        x << velocity, misalignment, accel_bias, gyro_bias;
        return x;
    }

    static ErrorState from_vector(const ErrorVector& x)
    {
        return {x.segment<3>(0), x.segment<3>(3), x.segment<3>(6), x.segment<3>(9)};
    }
};

/// Navigation solution representing one sigma point. Biases ride along unchanged.
struct SigmaSolution
{
    NavSolution nav;
    Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
    Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
};

struct DvlMeasurement
{
    double t = 0.0;
    Eigen::Vector3d velocity_body = Eigen::Vector3d::Zero(); // over ground, body frame [m/s]
};

inline SigmaSolution build_sigma_solution(const NavSolution& mean, const ErrorState& sigma)
{
    SigmaSolution s;
    s.nav.pos = mean.pos;
    s.nav.vel = mean.vel + sigma.velocity;
    s.nav.attitude = attitude_plus(mean.attitude, sigma.misalignment);
    s.accel_bias = sigma.accel_bias;
    s.gyro_bias = sigma.gyro_bias;
    return s;
}

inline ImuSample compensate_imu(const ImuSample& imu, const Eigen::Vector3d& accel_bias,
                                const Eigen::Vector3d& gyro_bias)
{
    ImuSample out = imu;
    out.specific_force = imu.specific_force - accel_bias;
    out.angular_rate = imu.angular_rate - gyro_bias;
    return out;
}

/// Navigation solution of the filter mean, carried through a window with
/// IMU data compensated by the mean bias estimates.
struct ReferenceTrajectory
{
    std::vector<NavSolution> states;     // window.size() + 1 entries, states[0] is the start
    std::vector<CycleDetail> details;    // one per sample
    std::vector<ImuSample> compensated;  // one per sample
    Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
    Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();

    const NavSolution& end() const { return states.back(); }
};

inline ReferenceTrajectory propagate_reference(const NavSolution& start, const Eigen::Vector3d& accel_bias,
                                               const Eigen::Vector3d& gyro_bias,
                                               std::span<const ImuSample> window, const EarthParams& earth)
{
    ReferenceTrajectory ref;
    ref.accel_bias = accel_bias;
    ref.gyro_bias = gyro_bias;
    ref.states.reserve(window.size() + 1);
    ref.details.reserve(window.size());
    ref.compensated.reserve(window.size());
    ref.states.push_back(start);
    for (const auto& raw : window)
    {
        ref.compensated.push_back(compensate_imu(raw, accel_bias, gyro_bias));
        CycleDetail detail;
        ref.states.push_back(na_cycle(ref.states.back(), ref.compensated.back(), earth, &detail));
        ref.details.push_back(detail);
    }
    return ref;
}

struct SigmaPropagation
{
    ReferenceTrajectory reference;
    std::vector<ErrorState> points;
};

/// Error between a propagated sigma solution and the propagated reference.
inline ErrorState extract_error(const SigmaSolution& propagated, const NavSolution& reference)
{
    ErrorState e;
    e.velocity = propagated.nav.vel - reference.vel;
    e.misalignment = attitude_minus(propagated.nav.attitude, reference.attitude);
    e.accel_bias = propagated.accel_bias;
    e.gyro_bias = propagated.gyro_bias;
    return e;
}

/// Propagates every sigma point through the navigation cycle over `window`.
///
/// Each point is turned into a full solution around `mean`, run through
/// na_cycle with its own bias-compensated IMU data, and differenced against
/// the reference solution (the mean compensated with the central point's
/// biases). A central point with zero velocity and attitude error therefore
/// yields exactly zero.
inline SigmaPropagation propagate_sigma_nespm(const NavSolution& mean, std::span<const ErrorState> sigma,
                                              std::span<const ImuSample> window, const EarthParams& earth)
{
    if (sigma.empty())
    {
        throw DomainError("nespm propagation: empty sigma set");
    }
    if (window.empty())
    {
        throw DomainError("nespm propagation: empty imu window");
    }
    SigmaPropagation out;
    out.reference = propagate_reference(mean, sigma[0].accel_bias, sigma[0].gyro_bias, window, earth);
    out.points.reserve(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i)
    {
        SigmaSolution s = build_sigma_solution(mean, sigma[i]);
        try
        {
            for (const auto& raw : window)
            {
                s.nav = na_cycle(s.nav, compensate_imu(raw, s.accel_bias, s.gyro_bias), earth);
            }
            out.points.push_back(extract_error(s, out.reference.end()));
        }
        catch (const Error& e)
        {
            throw SingularityError("sigma point " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

/// Discrete error transition over the reference window, a product of
/// first-order steps  I + F dt  with
///   dv'   = -[C* f] dpsi - C* db_a - [w_en + 2 w_ie] dv + [v] N dv
///   dpsi' = -[w_in,k+1] dpsi - N dv - C_{k+1} db_g
/// where N = d(w_en)/dv and db are biases relative to the reference biases.
inline ErrorCov linearized_transition(const ReferenceTrajectory& ref, const EarthParams& earth)
{
    ErrorCov phi = ErrorCov::Identity();
    for (std::size_t k = 0; k < ref.details.size(); ++k)
    {
        const CycleDetail& d = ref.details[k];
        const NavSolution& s = ref.states[k];
        const Eigen::Matrix3d n = transport_rate_jacobian(s.pos, earth);
        ErrorCov f = ErrorCov::Zero();
        f.block<3, 3>(0, 0) = -skew(d.transport_rate + 2.0 * d.earth_rate) + skew(s.vel) * n;
        f.block<3, 3>(0, 3) = -skew(d.specific_force_nav);
        f.block<3, 3>(0, 6) = -d.mid_attitude;
        f.block<3, 3>(3, 0) = -n;
        f.block<3, 3>(3, 3) = -skew(d.next_inertial_rate);
        f.block<3, 3>(3, 9) = -ref.states[k + 1].attitude;
        phi = (ErrorCov::Identity() + f * ref.compensated[k].dt) * phi;
    }
    return phi;
}

/// Baseline propagator: the sigma points are mapped through the linearized
/// error model about the reference trajectory.
inline std::vector<ErrorState> propagate_sigma_linearized(std::span<const ErrorState> sigma,
                                                          const ReferenceTrajectory& ref,
                                                          const EarthParams& earth)
{
    const ErrorCov phi = linearized_transition(ref, earth);
    std::vector<ErrorState> out;
    out.reserve(sigma.size());
    for (const auto& s : sigma)
    {
        ErrorVector delta = s.to_vector();
        delta.segment<3>(6) -= ref.accel_bias;
        delta.segment<3>(9) -= ref.gyro_bias;
        ErrorVector next = phi * delta;
        next.segment<3>(6) = s.accel_bias;
        next.segment<3>(9) = s.gyro_bias;
        out.push_back(ErrorState::from_vector(next));
    }
    return out;
}

/// INS-minus-DVL velocity residual resolved in the navigation frame.
inline Eigen::Vector3d dvl_innovation(const NavSolution& mean, const DvlMeasurement& dvl)
{
    return mean.vel - mean.attitude * dvl.velocity_body;
}

/// Residual predicted by a sigma point: v - exp(-dpsi) (v + dv) ~ -dv + dpsi x v.
inline Eigen::Vector3d dvl_predicted(const NavSolution& mean, const ErrorState& sigma)
{
    return mean.vel - exp_so3(-sigma.misalignment) * (mean.vel + sigma.velocity);
}

/// Source of the additive time-update noise. Implementations may adapt Q online.
class ProcessNoiseProvider
{
public:
    virtual ~ProcessNoiseProvider() = default;
    /// Q for the interval of length `interval` ending at time t.
    virtual ErrorCov process_noise(double t, double interval) const = 0;
};

/// Q = rate * interval, with `rate` the per-second noise covariance.
class ConstantProcessNoise final : public ProcessNoiseProvider
{
public:
    explicit ConstantProcessNoise(const ErrorCov& rate)
        : rate_(rate)
    {
    }

    ErrorCov process_noise(double, double interval) const override { return rate_ * interval; }
    const ErrorCov& rate() const noexcept { return rate_; }

private:
    ErrorCov rate_;
};

enum class PropagationMode
{
    nespm,
    linearized,
};

enum class TimeUpdateSchedule
{
    per_epoch,  // one sigma propagation over the whole IMU window
    per_sample, // one sigma propagation per IMU sample
};

struct FilterConfig
{
    ukf::UtParams ut;
    ErrorCov q_rate = ErrorCov::Zero();                  // per second
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity() * 4e-4; // DVL residual covariance
    ErrorCov p0 = ErrorCov::Identity();
    bool closed_loop = true;
    PropagationMode mode = PropagationMode::nespm;
    TimeUpdateSchedule schedule = TimeUpdateSchedule::per_epoch;
    double divergence_trace = 1e6;
};

struct FilterState
{
    double t = 0.0;
    NavSolution nav;
    ukf::Gaussian<kErrorDim> error;
};

struct StepResult
{
    std::vector<NavSolution> path;        // navigation solution after each sample; last is post-update
    std::vector<ErrorState> propagated;   // sigma points after the last time update
    bool updated = false;
    Eigen::Vector3d innovation = Eigen::Vector3d::Zero();
    Eigen::Matrix3d innovation_cov = Eigen::Matrix3d::Zero();
};

class NespmFilter
{
public:
    NespmFilter(FilterConfig config, const NavSolution& initial_nav, double t0,
                EarthParams earth = EarthParams::wgs84(),
                std::shared_ptr<const ProcessNoiseProvider> process_noise = nullptr)
        : config_(std::move(config)),
          earth_(std::move(earth)),
          weights_(ukf::compute_weights(kErrorDim, config_.ut)),
          process_noise_(process_noise ? std::move(process_noise)
                                       : std::make_shared<ConstantProcessNoise>(config_.q_rate))
    {
        state_.t = t0;
        state_.nav = initial_nav;
        state_.error.mean.setZero();
        state_.error.cov = config_.p0;
    }

    const FilterState& state() const noexcept { return state_; }
    const FilterConfig& config() const noexcept { return config_; }
    const EarthParams& earth() const noexcept { return earth_; }
    int repairs() const noexcept { return repairs_; }

    ErrorState mean_error() const { return ErrorState::from_vector(state_.error.mean); }

    /// Navigation solution with the current mean error applied (nav (+) mean).
    NavSolution corrected_solution() const
    {
        const ErrorState e = mean_error();
        NavSolution out = state_.nav;
        out.vel += e.velocity;
        out.attitude = attitude_plus(out.attitude, e.misalignment);
        return out;
    }

    /// Time update across `window`, then a DVL update if a measurement is given.
    StepResult step(std::span<const ImuSample> window, const std::optional<DvlMeasurement>& dvl)
    {
        StepResult result;
        if (!window.empty())
        {
            if (config_.schedule == TimeUpdateSchedule::per_epoch)
            {
                time_update(window, result);
            }
            else
            {
                for (std::size_t i = 0; i < window.size(); ++i)
                {
                    time_update(window.subspan(i, 1), result);
                }
            }
        }
        if (dvl)
        {
            measurement_update(*dvl, result);
            if (!result.path.empty())
            {
                result.path.back() = state_.nav;
            }
        }
        check_divergence();
        return result;
    }

    /// Feeds the mean velocity and attitude errors into the navigation solution
    /// and zeroes them; bias estimates stay in the mean.
    void apply_correction()
    {
        const ErrorState e = mean_error();
        state_.nav.vel += e.velocity;
        state_.nav.attitude = attitude_plus(state_.nav.attitude, e.misalignment);
        state_.error.mean.segment<6>(0).setZero();
    }

private:
    void time_update(std::span<const ImuSample> window, StepResult& result)
    {
        const ukf::SigmaSet<kErrorDim> sigma = ukf::generate_sigma_points<kErrorDim>(state_.error, weights_);
        std::vector<ErrorState> points;
        points.reserve(sigma.points.size());
        for (const auto& p : sigma.points)
        {
            points.push_back(ErrorState::from_vector(p));
        }

        SigmaPropagation prop;
        if (config_.mode == PropagationMode::nespm)
        {
            prop = propagate_sigma_nespm(state_.nav, points, window, earth_);
        }
        else
        {
            prop.reference = propagate_reference(state_.nav, points[0].accel_bias, points[0].gyro_bias,
                                                  window, earth_);
            prop.points = propagate_sigma_linearized(points, prop.reference, earth_);
        }

        std::vector<ErrorVector> propagated;
        propagated.reserve(prop.points.size());
        for (const auto& p : prop.points)
        {
            propagated.push_back(p.to_vector());
        }
        double interval = 0.0;
        for (const auto& s : window)
        {
            interval += s.dt;
        }
        state_.t = window.back().t;
        state_.error = ukf::unscented_transform<kErrorDim>(propagated, weights_,
                                                           process_noise_->process_noise(state_.t, interval));
        if (ukf::repair_covariance<kErrorDim>(state_.error.cov))
        {
            ++repairs_;
        }
        state_.nav = prop.reference.end();
        result.path.insert(result.path.end(), prop.reference.states.begin() + 1, prop.reference.states.end());
        result.propagated = std::move(prop.points);
    }

    void measurement_update(const DvlMeasurement& dvl, StepResult& result)
    {
        const NavSolution nav = state_.nav;
        const Eigen::Vector3d z = dvl_innovation(nav, dvl);
        const auto sigma = ukf::regenerate_sigma_points<kErrorDim>(state_.error, weights_);
        const auto update = ukf::measurement_update<kErrorDim, 3>(
            state_.error, sigma,
            [&nav](const ErrorVector& x) { return dvl_predicted(nav, ErrorState::from_vector(x)); }, z,
            config_.r);
        state_.error = update.posterior;
        if (ukf::repair_covariance<kErrorDim>(state_.error.cov))
        {
            ++repairs_;
        }
        result.updated = true;
        result.innovation = update.innovation;
        result.innovation_cov = update.innovation_cov;
        if (config_.closed_loop)
        {
            apply_correction();
        }
    }

    void check_divergence() const
    {
        const double trace = state_.error.cov.trace();
        if (!std::isfinite(trace) || trace > config_.divergence_trace || !state_.nav.vel.allFinite())
        {
            throw DivergenceError("filter diverged at t=" + std::to_string(state_.t)
                                  + " (covariance trace " + std::to_string(trace) + ")");
        }
    }

    FilterConfig config_;
    EarthParams earth_;
    ukf::UtWeights weights_;
    std::shared_ptr<const ProcessNoiseProvider> process_noise_;
    FilterState state_;
    int repairs_ = 0;
};

/// True error state of a navigation solution against ground truth and true biases.
inline ErrorState true_error(const NavSolution& nav, const NavSolution& truth, const Eigen::Vector3d& accel_bias,
                             const Eigen::Vector3d& gyro_bias)
{
    return {truth.vel - nav.vel, attitude_minus(truth.attitude, nav.attitude), accel_bias, gyro_bias};
}

/// Normalized estimation error squared of the filter mean against the true error state.
inline double nees(const ukf::Gaussian<kErrorDim>& belief, const ErrorState& truth)
{
    const ErrorVector e = truth.to_vector() - belief.mean;
    return e.dot(belief.cov.ldlt().solve(e));
}

} // namespace nespm
