#include <fmds/models.hpp>

#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace fmds;

TEST(Pdf, NormalAtMode)
{
  EXPECT_NEAR(pdf(Density(make_normal_location(1), 0.0), 0.0), 1 / std::sqrt(2 * std::numbers::pi), 1e-15);
}

TEST(Pdf, UniformInside)
{
  Density d(make_uniform_location(), 0.5);
  EXPECT_DOUBLE_EQ(pdf(d, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(pdf(d, 1.6), 0.0);
}

TEST(Pdf, GammaScaleDirect)
{
  // theta^-1 (x/theta)^k e^{-x/theta} / Gamma(k+1) at k=1, theta=2, x=2
  EXPECT_NEAR(pdf(Density(make_gamma_scale(1.0), 2.0), 2.0), 0.5 * std::exp(-1.0), 1e-14);
}

TEST(Pdf, MultivariateNormal)
{
  Vector t(2), x(2);
  t << 1, -1;
  x << 1, -1;
  EXPECT_NEAR(pdf(Density(make_normal_location(2), t), x), 1 / (2 * std::numbers::pi), 1e-15);
}

TEST(Pdf, LocationScaleIntegratesToOne)
{
  boost::math::quadrature::tanh_sinh<double> ts;
  for (BaseShape b : { BaseShape::Normal, BaseShape::Logistic, BaseShape::Laplace }) {
    Vector t(2);
    t << 0.7, 1.8;
    Density d(make_location_scale(b), t);
    auto f = [&](double x) { return pdf(d, x); };
    double total = ts.integrate(f, -std::numeric_limits<double>::infinity(), 0.7) +
                   ts.integrate(f, 0.7, std::numeric_limits<double>::infinity());
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Cdf, Examples)
{
  EXPECT_DOUBLE_EQ(cdf_1d(Density(make_normal_location(1), 0.0), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(cdf_1d(Density(make_uniform_location(), 0.0), 0.25), 0.25);
  EXPECT_NEAR(cdf_1d(Density(make_gamma_scale(0.0), 1.0), 1.0), 1 - std::exp(-1.0), 1e-15);
}

TEST(Quantile, Examples)
{
  EXPECT_NEAR(quantile_1d(Density(make_normal_location(1), 0.0), 0.5), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(quantile_1d(Density(make_uniform_location(), 2.0), 0.75), 2.75);
  EXPECT_NEAR(quantile_1d(Density(make_gamma_scale(0.0), 1.0), 1 - std::exp(-1.0)), 1.0, 1e-12);
}

TEST(Quantile, InvertsCdf)
{
  Density d(make_time_warp_power(WarpBase::Beta, 2.0, 3.0), 1.7);
  for (double u : { 0.01, 0.3, 0.5, 0.9, 0.999 })
    EXPECT_NEAR(cdf_1d(d, quantile_1d(d, u)), u, 1e-10);
}

TEST(Quantile, RejectsEndpoints)
{
  Density d(make_normal_location(1), 0.0);
  EXPECT_THROW(quantile_1d(d, 0.0), DomainError);
  EXPECT_THROW(quantile_1d(d, 1.0), DomainError);
}

TEST(Sample, NormalMean)
{
  auto s = sample(Density(make_normal_location(1), 0.0), 100000, 7);
  double mean = std::accumulate(s.data.begin(), s.data.end(), 0.0) / s.data.size();
  EXPECT_NEAR(mean, 0.0, 0.02);
}

TEST(Sample, SinglePointInSupport)
{
  for (std::uint64_t seed : { 1u, 2u, 3u }) {
    auto s = sample(Density(make_uniform_location(), 0.0), 1, seed);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_GE(s.data[0], 0.0);
    EXPECT_LE(s.data[0], 1.0);
  }
}

TEST(Sample, Deterministic)
{
  Density d(make_gamma_scale(2.0), 1.5);
  auto a = sample(d, 500, 42), b = sample(d, 500, 42), c = sample(d, 500, 43);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
}

TEST(Sample, ZeroSizeRejected)
{
  EXPECT_THROW(sample(Density(make_normal_location(1), 0.0), 0, 1), DomainError);
}

TEST(LogPartition, NaturalNormal)
{
  for (double t : { -1.5, 0.0, 2.0 }) {
    auto lp = log_partition(make_natural_normal(), Vector::Constant(1, t));
    EXPECT_DOUBLE_EQ(lp.value, 0.5 * t * t);
    EXPECT_DOUBLE_EQ(lp.gradient[0], t);
    EXPECT_DOUBLE_EQ(lp.hessian(0, 0), 1.0);
  }
  EXPECT_EQ(log_partition(make_natural_normal(), Vector::Zero(1)).value, 0.0);
}

TEST(LogPartition, Poisson)
{
  auto lp = log_partition(make_poisson(), Vector::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(lp.value, std::numbers::e);
  EXPECT_DOUBLE_EQ(lp.gradient[0], std::numbers::e);
  EXPECT_DOUBLE_EQ(lp.hessian(0, 0), std::numbers::e);
}

TEST(LogPartition, PoissonNormalizes)
{
  // sum_x exp(theta x - e^theta) / x! = 1
  Density d(make_poisson(), 1.3);
  double s = 0.0;
  for (int x = 0; x < 200; ++x)
    s += pdf(d, static_cast<double>(x));
  EXPECT_NEAR(s, 1.0, 1e-13);
}

TEST(LogPartition, NotExponentialFamily)
{
  EXPECT_THROW(log_partition(make_normal_location(1), Vector::Zero(1)), UnsupportedError);
}

TEST(Warp, PowerExamples)
{
  auto w = [](double a) { return warp_of(Density(make_time_warp_power(), a)); };
  EXPECT_DOUBLE_EQ(warp_apply(w(1.0), 0.3), 0.3);
  EXPECT_DOUBLE_EQ(warp_apply(w(2.0), 0.5), 0.25);
  EXPECT_NEAR(warp_apply(w(0.5), 0.25), 0.5, 1e-15);
}

TEST(Warp, SplineMonotone)
{
  auto fam = make_time_warp_spline({ 0.0, 0.5, 1.0 });
  Density d(fam, 0.2);
  auto w = warp_of(d);
  EXPECT_DOUBLE_EQ(warp_apply(w, 0.0), 0.0);
  EXPECT_NEAR(warp_apply(w, 0.5), 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(warp_apply(w, 1.0), 1.0);
  EXPECT_THROW(Density(fam, 1.2), DomainError);
}

TEST(FamilySpec, ParameterSpaceEnforced)
{
  EXPECT_THROW(Density(make_gamma_scale(1.0), -1.0), DomainError);
  EXPECT_THROW(make_gamma_scale(-1.0), ModelError);
  EXPECT_THROW(Density(make_normal_location(2), 0.0), DomainError);
}
