#include "nespm/earth_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nespm;

namespace {

constexpr double kPi = std::numbers::pi;

// Somigliana in the closed form (a*ge*cos^2 + b*gp*sin^2) / sqrt(a^2 cos^2 + b^2 sin^2),
// independent of the k-coefficient form used by gravity_ned.
double somigliana_closed_form(double lat)
{
    const double a = 6378137.0;
    const double b = a * std::sqrt(1.0 - 6.69437999014e-3);
    const double ge = 9.7803253359;
    const double gp = 9.8321849378;
    const double c = std::cos(lat);
    const double s = std::sin(lat);
    return (a * ge * c * c + b * gp * s * s) / std::sqrt(a * a * c * c + b * b * s * s);
}

} // namespace

TEST(EarthModel, RadiiAtEquatorAndPole)
{
    const auto eq = radii_of_curvature(0.0);
    EXPECT_NEAR(eq.meridian, 6335439.32729282843, 1e-6);
    EXPECT_DOUBLE_EQ(eq.transverse, 6378137.0);

    const auto pole = radii_of_curvature(kPi / 2.0);
    EXPECT_NEAR(pole.meridian, 6399593.62575848883, 1e-6);
    EXPECT_NEAR(pole.transverse, 6399593.62575848883, 1e-6);
}

TEST(EarthModel, RadiiEvenInLatitude)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat(-kPi / 2.0, kPi / 2.0);
    for (int i = 0; i < 200; ++i)
    {
        const double l = lat(rng);
        const auto p = radii_of_curvature(l);
        const auto m = radii_of_curvature(-l);
        EXPECT_EQ(p.meridian, m.meridian);
        EXPECT_EQ(p.transverse, m.transverse);
        EXPECT_GT(p.meridian, 0.0);
        EXPECT_GE(p.transverse, p.meridian);
    }
}

TEST(EarthModel, RadiiRejectNonFinite)
{
    EXPECT_THROW(radii_of_curvature(std::nan("")), DomainError);
    EXPECT_THROW(radii_of_curvature(2.0), DomainError);
}

TEST(EarthModel, NormalGravity)
{
    EXPECT_NEAR(gravity_ned(0.0, 0.0).z(), 9.7803253359, 1e-10);
    EXPECT_NEAR(gravity_ned(kPi / 2.0, 0.0).z(), 9.8321849378, 1e-9);
    for (double deg : {-70.0, -32.0, 10.0, 45.0, 80.0})
    {
        const double lat = deg * kPi / 180.0;
        EXPECT_NEAR(gravity_ned(lat, 0.0).z(), somigliana_closed_form(lat), 1e-9) << deg;
    }
    const auto g = gravity_ned(0.3, 0.0);
    EXPECT_EQ(g.x(), 0.0);
    EXPECT_EQ(g.y(), 0.0);
}

TEST(EarthModel, GravityDecreasesWithAltitude)
{
    for (double lat = -kPi / 2.0; lat <= kPi / 2.0; lat += 0.1)
    {
        EXPECT_LT(gravity_ned(lat, 1000.0).z(), gravity_ned(lat, 0.0).z());
        EXPECT_LT(gravity_ned(lat, 0.0).z(), gravity_ned(lat, -11000.0).z());
        EXPECT_EQ(gravity_ned(lat, 0.0).z(), gravity_ned(-lat, 0.0).z());
    }
    // free-air gradient is about 3.086e-6 s^-2
    EXPECT_NEAR(gravity_ned(0.5, 0.0).z() - gravity_ned(0.5, 1000.0).z(), 3.086e-3, 2e-5);
}

TEST(EarthModel, EarthRate)
{
    const double omega = EarthParams{}.rotation_rate;
    const auto eq = earth_rate_ned(0.0);
    EXPECT_DOUBLE_EQ(eq.x(), omega);
    EXPECT_EQ(eq.y(), 0.0);
    EXPECT_EQ(eq.z(), -0.0);
    const auto pole = earth_rate_ned(kPi / 2.0);
    EXPECT_NEAR(pole.x(), 0.0, 1e-20);
    EXPECT_DOUBLE_EQ(pole.z(), -omega);
    for (double lat = -1.5; lat <= 1.5; lat += 0.05)
    {
        EXPECT_NEAR(earth_rate_ned(lat).norm(), omega, 1e-18);
        EXPECT_EQ(earth_rate_ned(lat).x(), earth_rate_ned(-lat).x());
        EXPECT_EQ(earth_rate_ned(lat).z(), -earth_rate_ned(-lat).z());
    }
}

TEST(EarthModel, TransportRate)
{
    const GeodeticPosition eq{0.0, 0.0, 0.0};
    EXPECT_TRUE(transport_rate({0.4, 0.1, -20.0}, Eigen::Vector3d::Zero()).isZero(0.0));

    const double re = radii_of_curvature(0.0).transverse;
    const auto east = transport_rate(eq, {0.0, 3.0, 0.0});
    EXPECT_DOUBLE_EQ(east.x(), 3.0 / re);
    EXPECT_EQ(east.y(), 0.0);
    EXPECT_EQ(east.z(), -0.0);

    const GeodeticPosition p{0.6, 0.0, 150.0};
    const double rn = radii_of_curvature(0.6).meridian;
    const auto north = transport_rate(p, {2.0, 0.0, 0.0});
    EXPECT_EQ(north.x(), 0.0);
    EXPECT_DOUBLE_EQ(north.y(), -2.0 / (rn + 150.0));
    EXPECT_EQ(north.z(), -0.0);
}

TEST(EarthModel, TransportRateSingularAtPole)
{
    EXPECT_THROW(transport_rate({kPi / 2.0, 0.0, 0.0}, {1.0, 0.0, 0.0}), SingularityError);
    EXPECT_NO_THROW(transport_rate({kPi / 2.0 - 1e-6, 0.0, 0.0}, {1.0, 0.0, 0.0}));
}

TEST(EarthModel, TestModeZeroesRates)
{
    const EarthParams test = EarthParams::test_mode(9.81);
    EXPECT_TRUE(earth_rate_ned(0.7, test).isZero(0.0));
    EXPECT_TRUE(transport_rate({0.7, 0.0, 0.0}, {5.0, -3.0, 1.0}, test).isZero(0.0));
    EXPECT_EQ(gravity_ned(0.7, 500.0, test), Eigen::Vector3d(0.0, 0.0, 9.81));
    EXPECT_TRUE(gravity_ned(0.7, 500.0, EarthParams::test_mode(0.0)).isZero(0.0));
}

TEST(EarthModel, FiniteOverOperatingEnvelope)
{
    for (double lat = -kPi / 2.0 + 1e-6; lat <= kPi / 2.0 - 1e-6; lat += 0.01)
    {
        for (double h : {-11000.0, 0.0, 11000.0})
        {
            const GeodeticPosition p{lat, 0.0, h};
            EXPECT_TRUE(gravity_ned(lat, h).allFinite());
            EXPECT_TRUE(transport_rate(p, {10.0, 10.0, 1.0}).allFinite());
            EXPECT_TRUE(transport_rate_jacobian(p).allFinite());
        }
    }
}

TEST(EarthModel, TransportJacobianMatchesFiniteDifference)
{
    const GeodeticPosition p{0.55, 0.2, -30.0};
    const Eigen::Vector3d v(1.5, -0.7, 0.2);
    const Eigen::Matrix3d n = transport_rate_jacobian(p);
    for (int i = 0; i < 3; ++i)
    {
        Eigen::Vector3d dv = Eigen::Vector3d::Zero();
        dv[i] = 1e-3;
        const Eigen::Vector3d fd = (transport_rate(p, v + dv) - transport_rate(p, v - dv)) / 2e-3;
        EXPECT_TRUE(fd.isApprox(n.col(i), 1e-9) || (fd - n.col(i)).norm() < 1e-18) << i;
    }
}

TEST(EarthModel, LongitudeWrap)
{
    EXPECT_DOUBLE_EQ(wrap_longitude(kPi), kPi);
    EXPECT_DOUBLE_EQ(wrap_longitude(-kPi), kPi);
    EXPECT_NEAR(wrap_longitude(3.0 * kPi / 2.0), -kPi / 2.0, 1e-15);
}
