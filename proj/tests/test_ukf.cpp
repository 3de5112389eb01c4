#include "nespm/ukf.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace nespm;
using namespace nespm::ukf;

namespace {

template <int N>
Matrix<N> random_spd(std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> n;
    Matrix<N> a;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            a(i, j) = n(rng);
    return scale * (a * a.transpose() + 0.1 * Matrix<N>::Identity());
}

template <int N>
Vector<N> random_vector(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    Vector<N> v;
    for (int i = 0; i < N; ++i)
        v[i] = n(rng);
    return v;
}

} // namespace

TEST(UtWeights, TwelveStateDefaults)
{
    const UtWeights w = compute_weights(12);
    ASSERT_EQ(w.size(), 25u);
    EXPECT_NEAR(w.lambda, -11.999988, 1e-12);
    EXPECT_NEAR(w.mean[0], -999999.0, 1e-4);
    EXPECT_NEAR(w.cov[0], -999996.000001, 1e-4);
    for (std::size_t i = 1; i < w.size(); ++i)
    {
        EXPECT_NEAR(w.mean[i], 41666.666666666667, 1e-6);
        EXPECT_EQ(w.mean[i], w.cov[i]);
    }
    double sum = 0.0;
    for (double m : w.mean)
        sum += m;
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(UtWeights, PrintedCovarianceForm)
{
    UtParams p;
    p.weight_form = CovarianceWeightForm::printed;
    const UtWeights printed = compute_weights(12, p);
    const UtWeights standard = compute_weights(12);
    EXPECT_NEAR(printed.cov[0] - standard.cov[0], 2e-6, 1e-9);
    EXPECT_EQ(printed.mean, standard.mean);
}

TEST(UtWeights, RejectsBadParameters)
{
    EXPECT_THROW(compute_weights(0), DomainError);
    EXPECT_THROW(compute_weights(3, {0.0, 2.0, 0.0}), DomainError);
    EXPECT_THROW(compute_weights(3, {1.0, 2.0, -3.0}), DomainError);
}

TEST(SigmaPoints, ReproduceMeanAndCovariance)
{
    std::mt19937_64 rng(21);
    const UtWeights w = compute_weights(6, {0.5, 2.0, 0.0});
    for (int t = 0; t < 50; ++t)
    {
        const Gaussian<6> g{random_vector<6>(rng), random_spd<6>(rng)};
        const SigmaSet<6> s = generate_sigma_points<6>(g, w);
        ASSERT_EQ(s.points.size(), 13u);
        EXPECT_EQ(s.points[0], g.mean);
        for (int i = 1; i <= 6; ++i)
        {
            EXPECT_LT((s.points[i] + s.points[i + 6] - 2.0 * g.mean).norm(), 1e-12);
        }
        const Gaussian<6> back = unscented_transform<6>(s.points, w, Matrix<6>::Zero());
        EXPECT_LT((back.mean - g.mean).norm(), 1e-12);
        EXPECT_LT((back.cov - g.cov).norm(), 1e-10 * g.cov.norm());
    }
}

TEST(SigmaPoints, RejectIndefiniteCovariance)
{
    Gaussian<2> g;
    g.cov << 1.0, 2.0, 2.0, 1.0;
    try
    {
        generate_sigma_points<2>(g, compute_weights(2));
        FAIL() << "expected NotPositiveDefiniteError";
    }
    catch (const NotPositiveDefiniteError& e)
    {
        EXPECT_NEAR(e.min_eigenvalue(), -1.0, 1e-12);
    }
}

TEST(UnscentedTransform, ExactForAffineMaps)
{
    std::mt19937_64 rng(22);
    const UtWeights w = compute_weights(4);
    for (int t = 0; t < 200; ++t)
    {
        const Gaussian<4> g{random_vector<4>(rng), random_spd<4>(rng)};
        const Matrix<4> a = random_spd<4>(rng) - random_spd<4>(rng);
        const Vector<4> b = random_vector<4>(rng);
        const Matrix<4> q = random_spd<4>(rng, 0.01);
        const SigmaSet<4> s = generate_sigma_points<4>(g, w);
        std::vector<Vector<4>> y;
        for (const auto& x : s.points)
            y.push_back(a * x + b);
        const Gaussian<4> out = unscented_transform<4>(y, w, q);
        const Matrix<4> cov = a * g.cov * a.transpose() + q;
        EXPECT_LT((out.mean - (a * g.mean + b)).norm(), 1e-9 * (1.0 + out.mean.norm()));
        EXPECT_LT((out.cov - cov).norm(), 1e-9 * (1.0 + cov.norm()));
    }
}

TEST(UnscentedTransform, ScalarSquareMatchesGaussianMoments)
{
    // y = x^2, x ~ N(mu, s^2): E[y] = mu^2 + s^2, Var[y] = 4 mu^2 s^2 + 2 s^4.
    for (double alpha : {1e-3, 0.1, 1.0})
    {
        const UtWeights w = compute_weights(1, {alpha, 2.0, 0.0});
        for (double mu : {-1.5, 0.0, 0.7, 3.0})
        {
            for (double s : {0.1, 1.0, 2.0})
            {
                Gaussian<1> g;
                g.mean << mu;
                g.cov << s * s;
                const SigmaSet<1> set = generate_sigma_points<1>(g, w);
                std::vector<Vector<1>> y;
                for (const auto& x : set.points)
                    y.push_back(x.cwiseProduct(x));
                const Gaussian<1> out = unscented_transform<1>(y, w, Matrix<1>::Zero());
                const double var = 4.0 * mu * mu * s * s + 2.0 * s * s * s * s;
                EXPECT_NEAR(out.mean[0], mu * mu + s * s, 1e-9 * (1.0 + mu * mu + s * s));
                EXPECT_NEAR(out.cov(0, 0), var, 1e-7 * (1.0 + var)) << alpha << " " << mu << " " << s;
            }
        }
    }
}

TEST(WeightedMean, StableForLargeCentralWeight)
{
    const UtWeights w = compute_weights(12);
    std::vector<Vector<3>> points(w.size(), Vector<3>(1e3, -2e3, 5.0));
    points[0] += Vector<3>::Constant(1e-12);
    const Vector<3> m = weighted_mean<3>(points, w.mean);
    // the outer points sit at -eps relative to the centre with total weight 1e6
    const double eps = points[0][0] - 1e3;
    EXPECT_NEAR(m[0], 1e3 + eps - 1e6 * eps, 1e-12);
    EXPECT_THROW(weighted_mean<3>(std::span<const Vector<3>>(points).first(3), w.mean), DomainError);
}

TEST(MeasurementUpdate, ScalarKalmanOracle)
{
    // x ~ N(1, 4), z = 2x + v, v ~ N(0, 1), z = 3.
    // S = 17, K = 8/17, x+ = 1 + 8/17, P+ = 4 - 64/17.
    Gaussian<1> prior;
    prior.mean << 1.0;
    prior.cov << 4.0;
    const UtWeights w = compute_weights(1);
    const SigmaSet<1> s = generate_sigma_points<1>(prior, w);
    const auto r = measurement_update<1, 1>(
        prior, s, [](const Vector<1>& x) { return Vector<1>(2.0 * x); }, Vector<1>(3.0), Matrix<1>::Identity());
    EXPECT_NEAR(r.innovation_cov(0, 0), 17.0, 1e-8);
    EXPECT_NEAR(r.gain(0, 0), 8.0 / 17.0, 1e-9);
    EXPECT_NEAR(r.posterior.mean[0], 1.0 + 8.0 / 17.0, 1e-9);
    EXPECT_NEAR(r.posterior.cov(0, 0), 4.0 - 64.0 / 17.0, 1e-8);
    EXPECT_NEAR(r.innovation[0], 1.0, 1e-9);
}

TEST(MeasurementUpdate, ZeroInnovationKeepsMean)
{
    std::mt19937_64 rng(23);
    const Gaussian<4> prior{random_vector<4>(rng), random_spd<4>(rng)};
    const UtWeights w = compute_weights(4);
    const SigmaSet<4> s = generate_sigma_points<4>(prior, w);
    auto h = [](const Vector<4>& x) { return Vector<2>(x[0] + x[1], x[2] - 0.5 * x[3]); };
    const Vector<2> z = h(prior.mean);
    const auto r = measurement_update<4, 2>(prior, s, h, z, Matrix<2>::Identity() * 0.1);
    EXPECT_LT((r.posterior.mean - prior.mean).norm(), 1e-9);
    EXPECT_LT(r.posterior.cov.trace(), prior.cov.trace());
}

TEST(MeasurementUpdate, ConstantModelIsUninformative)
{
    std::mt19937_64 rng(24);
    const Gaussian<3> prior{random_vector<3>(rng), random_spd<3>(rng)};
    const SigmaSet<3> s = generate_sigma_points<3>(prior, compute_weights(3));
    const auto r = measurement_update<3, 2>(
        prior, s, [](const Vector<3>&) { return Vector<2>(1.0, 2.0); }, Vector<2>(5.0, -1.0),
        Matrix<2>::Identity());
    EXPECT_LT(r.gain.norm(), 1e-9);
    EXPECT_LT((r.posterior.mean - prior.mean).norm(), 1e-9);
    EXPECT_LT((r.posterior.cov - prior.cov).norm(), 1e-9);
}

TEST(MeasurementUpdate, SingularInnovationThrows)
{
    Gaussian<2> prior;
    const SigmaSet<2> s = generate_sigma_points<2>(prior, compute_weights(2));
    EXPECT_THROW((measurement_update<2, 1>(
                     prior, s, [](const Vector<2>&) { return Vector<1>(0.0); }, Vector<1>(0.0), Matrix<1>::Zero())),
                 SingularInnovationError);
}

TEST(UnscentedKalmanFilter, MatchesLinearKalmanFilter)
{
    std::mt19937_64 rng(25);
    std::normal_distribution<double> n;
    Matrix<4> f;
    f << 1, 0.1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0.1, 0, 0, -0.05, 0.98;
    Eigen::Matrix<double, 2, 4> h;
    h << 1, 0, 0, 0, 0, 0, 1, 0;
    const Matrix<4> q = Matrix<4>::Identity() * 1e-3;
    const Matrix<2> r = Matrix<2>::Identity() * 0.25;

    Gaussian<4> kf{Vector<4>(0.5, -0.2, 1.0, 0.0), Matrix<4>::Identity()};
    UnscentedKalmanFilter<4> ukf(kf);
    Vector<4> x(0.0, 0.1, 0.8, 0.0);
    double worst_mean = 0.0;
    double worst_cov = 0.0;
    for (int k = 0; k < 100; ++k)
    {
        x = f * x + Vector<4>(n(rng), n(rng), n(rng), n(rng)) * std::sqrt(1e-3);
        const Vector<2> z = h * x + Vector<2>(n(rng), n(rng)) * 0.5;

        kf.mean = f * kf.mean;
        kf.cov = f * kf.cov * f.transpose() + q;
        const Matrix<2> s = h * kf.cov * h.transpose() + r;
        const Eigen::Matrix<double, 4, 2> gain = kf.cov * h.transpose() * s.inverse();
        kf.mean += gain * (z - h * kf.mean);
        kf.cov = (Matrix<4>::Identity() - gain * h) * kf.cov;

        ukf.predict(pointwise<4>([&](const Vector<4>& p) { return Vector<4>(f * p); }), q);
        ukf.update<2>([&](const Vector<4>& p) { return Vector<2>(h * p); }, z, r);
        worst_mean = std::max(worst_mean, (ukf.belief().mean - kf.mean).norm());
        worst_cov = std::max(worst_cov, (ukf.belief().cov - kf.cov).norm());
    }
    EXPECT_LT(worst_mean, 1e-8);
    EXPECT_LT(worst_cov, 1e-8);
    EXPECT_EQ(ukf.repairs(), 0);
}

TEST(UnscentedKalmanFilter, CovarianceStaysPositiveDefinite)
{
    std::mt19937_64 rng(26);
    std::normal_distribution<double> n;
    UnscentedKalmanFilter<3> ukf({Vector<3>(0.1, 0.2, 0.3), Matrix<3>::Identity()});
    auto f = [](const Vector<3>& p) {
        return Vector<3>(p[0] + 0.1 * std::sin(p[1]), 0.95 * p[1] + 0.05 * p[2] * p[2], p[2] - 0.01 * p[0]);
    };
    auto h = [](const Vector<3>& p) { return Vector<1>(p[0] * p[0] + p[2]); };
    for (int k = 0; k < 2000; ++k)
    {
        ukf.predict(pointwise<3>(f), Matrix<3>::Identity() * 1e-4);
        ukf.update<1>(h, Vector<1>(0.3 + 0.1 * n(rng)), Matrix<1>::Identity() * 0.01);
        ASSERT_TRUE(ukf.belief().mean.allFinite());
        ASSERT_GT(min_eigenvalue<3>(ukf.belief().cov), 0.0) << k;
        ASSERT_LT((ukf.belief().cov - ukf.belief().cov.transpose()).norm(), 1e-15);
    }
}

TEST(RepairCovariance, ClampsOnlyWhenNeeded)
{
    Matrix<2> good = Matrix<2>::Identity();
    EXPECT_FALSE(repair_covariance<2>(good));
    EXPECT_EQ(good, Matrix<2>::Identity());

    Matrix<2> bad;
    bad << 1.0, 1.0, 1.0, 1.0 - 1e-3;
    EXPECT_TRUE(repair_covariance<2>(bad));
    EXPECT_GE(min_eigenvalue<2>(bad), 1e-12 * 0.999);
    EXPECT_NEAR(bad.trace(), 2.0, 2e-3);
}
