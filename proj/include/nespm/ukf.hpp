#pragma once

// Scaled unscented transform and additive-noise UKF cycle.
//
// Sigma points use the columns of the lower-triangular Cholesky factor L
// (P = L L^T), so that  sum_i w^c_i (x_i - m)(x_i - m)^T  reconstructs P.

#include "nespm/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace nespm::ukf {

template <int N>
using Vector = Eigen::Matrix<double, N, 1>;
template <int N>
using Matrix = Eigen::Matrix<double, N, N>;

/// How w_0^c is formed. `standard` is lambda/(n+lambda) + (1 - alpha^2 + beta);
/// `printed` uses (1 + alpha^2 + beta) instead and exists for comparison runs.
enum class CovarianceWeightForm
{
    standard,
    printed,
};

struct UtParams
{
    double alpha = 1e-3;
    double beta = 2.0;
    double kappa = 0.0;
    CovarianceWeightForm weight_form = CovarianceWeightForm::standard;
};

struct UtWeights
{
    int n = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double kappa = 0.0;
    double lambda = 0.0;
    std::vector<double> mean; // w^m, 2n+1 entries
    std::vector<double> cov;  // w^c, 2n+1 entries

    std::size_t size() const noexcept { return mean.size(); }
    /// n + lambda, the factor under the matrix square root.
    double spread() const noexcept { return n + lambda; }
};

inline UtWeights compute_weights(int n, const UtParams& params = {})
{
    if (n < 1)
    {
        throw DomainError("ut weights: state dimension must be >= 1");
    }
    if (!(params.alpha > 0.0))
    {
        throw DomainError("ut weights: alpha must be positive");
    }
    UtWeights w;
    w.n = n;
    w.alpha = params.alpha;
    w.beta = params.beta;
    w.kappa = params.kappa;
    w.lambda = params.alpha * params.alpha * (n + params.kappa) - n;
    const double spread = n + w.lambda;
    if (!(spread > 0.0))
    {
        throw DomainError("ut weights: n + lambda must be positive");
    }
    const double alpha_sq = params.alpha * params.alpha;
    const double c0_term = params.weight_form == CovarianceWeightForm::standard
                               ? 1.0 - alpha_sq + params.beta
                               : 1.0 + alpha_sq + params.beta;
    const std::size_t count = 2 * static_cast<std::size_t>(n) + 1;
    w.mean.assign(count, 1.0 / (2.0 * spread));
    w.cov.assign(count, 1.0 / (2.0 * spread));
    w.mean[0] = w.lambda / spread;
    w.cov[0] = w.lambda / spread + c0_term;
    return w;
}

template <int N>
struct Gaussian
{
    Vector<N> mean = Vector<N>::Zero();
    Matrix<N> cov = Matrix<N>::Identity();
};

template <int N>
struct SigmaSet
{
    std::vector<Vector<N>> points;
    UtWeights weights;
};

template <int N>
Matrix<N> symmetrized(const Matrix<N>& m)
{
    return 0.5 * (m + m.transpose());
}

template <int N>
double min_eigenvalue(const Matrix<N>& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix<N>> solver(symmetrized<N>(m), Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

/// Symmetrizes P and, if its Cholesky factorization fails, clamps eigenvalues
/// from below at `floor`. Returns true when the clamp was applied.
template <int N>
bool repair_covariance(Matrix<N>& p, double floor = 1e-12)
{
    p = symmetrized<N>(p);
    if (Eigen::LLT<Matrix<N>>(p).info() == Eigen::Success)
    {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix<N>> solver(p);
    const Vector<N> clamped = solver.eigenvalues().cwiseMax(floor);
    p = symmetrized<N>(solver.eigenvectors() * clamped.asDiagonal() * solver.eigenvectors().transpose());
    return true;
}

template <int N>
SigmaSet<N> generate_sigma_points(const Gaussian<N>& g, const UtWeights& w)
{
    if (w.n != N)
    {
        throw DomainError("sigma points: weight dimension mismatch");
    }
    const Eigen::LLT<Matrix<N>> llt(g.cov);
    if (llt.info() != Eigen::Success)
    {
        throw NotPositiveDefiniteError("sigma points: covariance is not positive definite",
                                       min_eigenvalue<N>(g.cov));
    }
    const Matrix<N> root = std::sqrt(w.spread()) * Matrix<N>(llt.matrixL());
    SigmaSet<N> set;
    set.weights = w;
    set.points.reserve(w.size());
    set.points.push_back(g.mean);
    for (int i = 0; i < N; ++i)
    {
        set.points.push_back(g.mean + root.col(i));
    }
    for (int i = 0; i < N; ++i)
    {
        set.points.push_back(g.mean - root.col(i));
    }
    return set;
}

/// Same contract as generate_sigma_points; used on the predicted belief.
template <int N>
SigmaSet<N> regenerate_sigma_points(const Gaussian<N>& predicted, const UtWeights& w)
{
    return generate_sigma_points<N>(predicted, w);
}

/// sum_i w_i y_i, evaluated as y_0 + sum_{i>0} w_i (y_i - y_0) so that the
/// large-magnitude central weight of small-alpha sets does not cancel.
template <int M>
Vector<M> weighted_mean(std::span<const Vector<M>> points, const std::vector<double>& weights)
{
    if (points.size() != weights.size() || points.empty())
    {
        throw DomainError("weighted mean: point/weight count mismatch");
    }
    const Vector<M>& anchor = points[0];
    Vector<M> offset = Vector<M>::Zero(anchor.size());
    for (std::size_t i = 1; i < points.size(); ++i)
    {
        offset += weights[i] * (points[i] - anchor);
    }
    return anchor + offset;
}

template <int N>
Gaussian<N> unscented_transform(std::span<const Vector<N>> propagated, const UtWeights& w,
                                const Matrix<N>& additive_cov)
{
    if (propagated.size() != w.size())
    {
        throw DomainError("unscented transform: expected 2n+1 points");
    }
    Gaussian<N> out;
    out.mean = weighted_mean<N>(propagated, w.mean);
    out.cov = additive_cov;
    for (std::size_t i = 0; i < propagated.size(); ++i)
    {
        const Vector<N> d = propagated[i] - out.mean;
        out.cov += w.cov[i] * d * d.transpose();
    }
    out.cov = symmetrized<N>(out.cov);
    return out;
}

template <int N, int M>
struct UpdateResult
{
    Gaussian<N> posterior;
    Vector<M> predicted_measurement;
    Vector<M> innovation;
    Matrix<M> innovation_cov;
    Eigen::Matrix<double, N, M> gain;
};

/// Measurement update from sigma points regenerated around the prediction.
/// `h` maps a state point to a measurement point.
template <int N, int M, typename H>
UpdateResult<N, M> measurement_update(const Gaussian<N>& pred, const SigmaSet<N>& sigma, H&& h,
                                      const Vector<M>& z, const Matrix<M>& r)
{
    const UtWeights& w = sigma.weights;
    std::vector<Vector<M>> zs;
    zs.reserve(sigma.points.size());
    for (const auto& x : sigma.points)
    {
        zs.push_back(h(x));
    }

    UpdateResult<N, M> out;
    out.predicted_measurement = weighted_mean<M>(zs, w.mean);
    Matrix<M> s = r;
    Eigen::Matrix<double, N, M> cross = Eigen::Matrix<double, N, M>::Zero();
    for (std::size_t i = 0; i < zs.size(); ++i)
    {
        const Vector<M> dz = zs[i] - out.predicted_measurement;
        const Vector<N> dx = sigma.points[i] - pred.mean;
        s += w.cov[i] * dz * dz.transpose();
        cross += w.cov[i] * dx * dz.transpose();
    }
    s = symmetrized<M>(s);
    const Eigen::LLT<Matrix<M>> s_llt(s);
    if (s_llt.info() != Eigen::Success)
    {
        throw SingularInnovationError("measurement update: innovation covariance is not invertible");
    }
    out.gain = s_llt.solve(cross.transpose()).transpose();
    out.innovation = z - out.predicted_measurement;
    out.innovation_cov = s;
    out.posterior.mean = pred.mean + out.gain * out.innovation;
    out.posterior.cov = symmetrized<N>(pred.cov - out.gain * s * out.gain.transpose());
    return out;
}

/// Adapts a per-point map into a whole-set propagation callback.
template <int N, typename F>
auto pointwise(F&& f)
{
    return [f = std::forward<F>(f)](std::span<const Vector<N>> points) {
        std::vector<Vector<N>> out;
        out.reserve(points.size());
        for (const auto& p : points)
        {
            out.push_back(f(p));
        }
        return out;
    };
}

/// Holds a belief and runs predict/update cycles. Propagation callbacks
/// receive the whole sigma set so that set-level propagators (one reference
/// trajectory shared by all points) fit the same interface.
template <int N>
class UnscentedKalmanFilter
{
public:
    UnscentedKalmanFilter(Gaussian<N> initial, const UtParams& params = {})
        : belief_(std::move(initial)), weights_(compute_weights(N, params))
    {
    }

    const Gaussian<N>& belief() const noexcept { return belief_; }
    Gaussian<N>& belief() noexcept { return belief_; }
    const UtWeights& weights() const noexcept { return weights_; }
    int repairs() const noexcept { return repairs_; }

    template <typename Propagate>
    const Gaussian<N>& predict(Propagate&& propagate, const Matrix<N>& q)
    {
        const SigmaSet<N> sigma = generate_sigma_points<N>(belief_, weights_);
        const std::vector<Vector<N>> propagated = propagate(std::span<const Vector<N>>(sigma.points));
        belief_ = unscented_transform<N>(propagated, weights_, q);
        if (repair_covariance<N>(belief_.cov))
        {
            ++repairs_;
        }
        return belief_;
    }

    template <int M, typename H>
    UpdateResult<N, M> update(H&& h, const Vector<M>& z, const Matrix<M>& r)
    {
        const SigmaSet<N> sigma = regenerate_sigma_points<N>(belief_, weights_);
        auto result = measurement_update<N, M>(belief_, sigma, std::forward<H>(h), z, r);
        belief_ = result.posterior;
        if (repair_covariance<N>(belief_.cov))
        {
            ++repairs_;
        }
        return result;
    }

private:
    Gaussian<N> belief_;
    UtWeights weights_;
    int repairs_ = 0;
};

} // namespace nespm::ukf
