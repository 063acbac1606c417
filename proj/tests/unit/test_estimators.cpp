#include <fmds/estimators.hpp>
#include <fmds/testing/oracles.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

using namespace fmds;

namespace {

SampleSet points(std::vector<double> x)
{
  SampleSet s;
  s.dim = 1;
  s.data = std::move(x);
  return s;
}

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); }

} // namespace

TEST(Kde, SinglePoint)
{
  EstimatedDensity e(points({ 0.0 }), KdeConfig::fixed(KernelSpec::gaussian(1.0)));
  EXPECT_NEAR(kde_evaluate(e, 0.0), 1 / std::sqrt(2 * std::numbers::pi), 1e-15);
}

TEST(Kde, TwoPointsAverage)
{
  EstimatedDensity e(points({ -1.0, 1.0 }), KdeConfig::fixed(KernelSpec::gaussian(1.0)));
  EXPECT_NEAR(kde_evaluate(e, 0.0), phi(1.0), 1e-15);
}

TEST(Kde, FarTail)
{
  EstimatedDensity e(points({ 0.0, 0.5 }), KdeConfig::fixed(KernelSpec::gaussian(0.1)));
  EXPECT_LT(kde_evaluate(e, 2.0), 1e-20);
  EXPECT_EQ(e.windowed(2.0), 0.0);
}

TEST(Kde, WindowedMatchesExactSum)
{
  auto s = sample(Density(make_normal_location(1), 0.0), 2000, 3);
  EstimatedDensity e(s, KdeConfig::silverman());
  for (double x : { -3.0, -0.2, 0.0, 1.7 })
    EXPECT_NEAR(e.windowed(x), kde_evaluate(e, x), 1e-15);
}

TEST(Kde, SilvermanBandwidth)
{
  auto s = points({ 0.0, 1.0, 2.0, 3.0, 4.0 });
  double sd = std::sqrt(2.5); // sample standard deviation, n - 1 divisor
  EstimatedDensity e(s, KdeConfig::silverman());
  EXPECT_NEAR(e.bandwidth(), 1.06 * sd * std::pow(5.0, -0.2), 1e-14);
}

TEST(Kde, DegenerateSampleRejected)
{
  EXPECT_THROW(EstimatedDensity(points({ 1.0, 1.0 }), KdeConfig::silverman()), DomainError);
}

TEST(Plugin, IdenticalSamples)
{
  auto s = sample(Density(make_normal_location(1), 0.0), 500, 11);
  EXPECT_EQ(plugin_distance(s, s, DissimilaritySpec::l2()), 0.0);
  EXPECT_EQ(plugin_distance(s, s, DissimilaritySpec::hellinger()), 0.0);
}

TEST(Plugin, NormalPairSingleSeed)
{
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 2.0);
  auto a = sample(f, 10000, 101), b = sample(g, 10000, 202);
  double l2 = std::sqrt((1 - std::exp(-1.0)) / std::sqrt(std::numbers::pi));
  double h = std::sqrt(2 - 2 * std::exp(-0.5));
  EXPECT_NEAR(plugin_distance(a, b, DissimilaritySpec::l2()) / l2, 1.0, 0.10);
  EXPECT_NEAR(plugin_distance(a, b, DissimilaritySpec::hellinger()) / h, 1.0, 0.10);
}

TEST(Plugin, UnsupportedKinds)
{
  auto s = points({ 0.0, 1.0, 2.0 });
  EXPECT_THROW(plugin_distance(s, s, DissimilaritySpec::symkl()), UnsupportedError);
  EXPECT_THROW(sample_dissimilarity(s, s, DissimilaritySpec::chisq()), UnsupportedError);
}

TEST(Mmd, HandComputedTwoPoints)
{
  // Gaussian smoothing with bandwidth b gives the RKHS kernel N(0, 2 b^2).
  const double b = 0.8;
  auto k = [&](double u) { return std::exp(-u * u / (4 * b * b)) / (2 * b * std::sqrt(std::numbers::pi)); };
  auto s = points({ 0.0, 1.0 });
  EXPECT_NEAR(mmd_ustat(s, s, KernelSpec::gaussian(b)), k(1.0) - k(0.0), 1e-15);
}

TEST(Mmd, TriweightHandComputed)
{
  const auto kern = KernelSpec::triweight(0.6);
  auto a = points({ 0.0, 0.5 }), b = points({ 0.2 });
  // within-a term over i != j, within-b is empty for m = 1
  EXPECT_THROW(mmd_ustat(a, b, kern), DomainError);
  auto c = points({ 0.2, 0.9 });
  double want = kern.rkhs(0.5) + kern.rkhs(0.7) -
                (kern.rkhs(0.2) + kern.rkhs(0.9) + kern.rkhs(0.3) + kern.rkhs(0.4)) / 2;
  EXPECT_NEAR(mmd_ustat(a, c, kern), want, 1e-15);
}

TEST(Mmd, NullMeanNearZero)
{
  Density f(make_normal_location(1), 0.0);
  std::vector<double> v;
  for (std::uint64_t s = 0; s < 20; ++s)
    v.push_back(mmd_ustat(sample(f, 400, 2 * s + 1), sample(f, 400, 2 * s + 2), KernelSpec::gaussian(1.0)));
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double var = 0.0;
  for (double x : v)
    var += (x - mean) * (x - mean) / (v.size() - 1);
  EXPECT_LT(std::abs(mean), 4 * std::sqrt(var / v.size()));
}

TEST(EmpiricalW2, Examples)
{
  EXPECT_DOUBLE_EQ(empirical_w2_1d(points({ 0.0 }), points({ 3.0 })), 3.0);
  EXPECT_DOUBLE_EQ(empirical_w2_1d(points({ 1.0, 0.0 }), points({ 3.0, 2.0 })), 2.0);
}

TEST(EmpiricalW2, UnequalSizes)
{
  // {0, 1} against {0, 0.5, 1}: quantile levels 1/3, 1/2, 2/3, 1
  double want = std::sqrt((1.0 / 6) * 0.25 + (1.0 / 6) * 0.25);
  EXPECT_NEAR(empirical_w2_1d(points({ 0.0, 1.0 }), points({ 0.0, 0.5, 1.0 })), want, 1e-15);
}

TEST(EmpiricalW2, ThreeAgainstFourByAssignment)
{
  // replicate to 12 atoms each and solve the assignment problem
  std::vector<double> a{ 0.3, -1.0, 2.2 }, b{ 0.0, 0.5, 1.9, -0.4 };
  std::vector<double> ra, rb;
  for (double x : a)
    ra.insert(ra.end(), 4, x);
  for (double x : b)
    rb.insert(rb.end(), 3, x);
  EXPECT_NEAR(empirical_w2_1d(points(a), points(b)), oracle::hungarian_w2(ra, rb), 1e-14);
}

TEST(EmpiricalW2, NormalPair)
{
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 2.0);
  EXPECT_NEAR(empirical_w2_1d(sample(f, 10000, 5), sample(g, 10000, 6)), 2.0, 0.1);
}

TEST(SampleCsv, RoundTrip)
{
  auto s = sample(Density(make_gamma_scale(1.0), 2.0), 50, 9, "gamma_a");
  std::stringstream io;
  write_sample_csv(io, s);
  auto r = read_sample_csv(io);
  EXPECT_EQ(r.source_id, s.source_id);
  EXPECT_EQ(r.seed, s.seed);
  EXPECT_EQ(r.dim, s.dim);
  EXPECT_EQ(r.data, s.data);
}

TEST(SampleCsv, MalformedRejected)
{
  std::stringstream io("#source_id,dim,seed\n#a,1,3\n0.5\nxyz\n");
  EXPECT_THROW(read_sample_csv(io), ParseError);
}

TEST(SamplePairwise, W2Matrix)
{
  std::vector<SampleSet> v{ points({ 0.0 }), points({ 3.0 }), points({ 1.0 }) };
  auto m = pairwise_matrix(v, DissimilaritySpec::w2(), EstimatorConfig{});
  EXPECT_DOUBLE_EQ(m(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(m(1, 2), 2.0);
  EXPECT_EQ(m.labels[0], "q0");
}
