#include <fmds/metrics.hpp>

#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>

using namespace fmds;

namespace {

const double pinf = std::numeric_limits<double>::infinity();

//! Independent integral over the real line, split at `mid`.
template <class F>
double line_integral(F f, double mid = 0.0)
{
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, -pinf, mid) + ts.integrate(f, mid, pinf);
}

double sq(double x) { return x * x; }

} // namespace

TEST(L2, NormalPair)
{
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 2.0);
  double oracle = line_integral([&](double x) { return sq(pdf(f, x) - pdf(g, x)); }, 1.0);
  EXPECT_NEAR(oracle, (1 - std::exp(-1.0)) / std::sqrt(std::numbers::pi), 1e-10);
  EXPECT_NEAR(sq(l2_distance(f, g)), oracle, 1e-12);
  EXPECT_NEAR(sq(l2_distance(f, g, Evaluation::Quadrature)), oracle, 1e-10);
}

TEST(L2, UniformPair)
{
  auto fam = make_uniform_location();
  EXPECT_NEAR(sq(l2_distance(Density(fam, 0.1), Density(fam, 0.4))), 0.6, 1e-12);
  EXPECT_NEAR(sq(l2_distance(Density(fam, 0.1), Density(fam, 0.4), Evaluation::Quadrature)), 0.6, 1e-10);
  // plateau for separations >= 1
  EXPECT_DOUBLE_EQ(l2_closed_form(Density(fam, 0.0), Density(fam, 2.0)), 2.0);
  EXPECT_DOUBLE_EQ(l2_closed_form(Density(fam, 0.0), Density(fam, 5.0)), 2.0);
}

TEST(L2, GammaScaleAgainstQuadrature)
{
  auto fam = make_gamma_scale(1.0);
  Density f(fam, 1.0), g(fam, 2.0);
  boost::math::quadrature::tanh_sinh<double> ts;
  double oracle = ts.integrate([&](double x) { return sq(pdf(f, x) - pdf(g, x)); }, 0.0, pinf);
  EXPECT_NEAR(oracle, 0.0787037037, 1e-9);
  EXPECT_NEAR(l2_closed_form(f, g) / oracle, 1.0, 1e-9);
}

TEST(L2, Identity)
{
  for (const auto& d : { Density(make_normal_location(1), 0.3), Density(make_gamma_scale(2.0), 1.3),
                         Density(make_uniform_location(), 0.2) })
    EXPECT_EQ(l2_distance(d, d), 0.0);
}

TEST(L2, ClosedFormDispatch)
{
  Vector t(2);
  t << 0, 1;
  Density d(make_location_scale(BaseShape::Logistic), t);
  EXPECT_THROW(l2_closed_form(d, d), DispatchError);
}

TEST(L2, DifferentMeasuresRejected)
{
  EXPECT_THROW(l2_distance(Density(make_poisson(), 0.0), Density(make_normal_location(1), 0.0)),
               UnsupportedError);
}

TEST(Quadrature, TanhSinhEndpointSingularity)
{
  quad::Options opt;
  opt.rule = quad::Rule::TanhSinh;
  EXPECT_NEAR(quad::integrate([](double x) { return 1 / std::sqrt(x); }, 0.0, 1.0, opt).value, 2.0, 1e-9);
  // nested use: int_0^1 int_0^1 (x y)^(-1/2) dy dx = 4
  auto outer = [&](double x) {
    return quad::integrate([&](double y) { return 1 / std::sqrt(x * y); }, 0.0, 1.0, opt).value;
  };
  EXPECT_NEAR(quad::integrate(outer, 0.0, 1.0, opt).value, 4.0, 1e-8);
  // a narrow interval falls through to Gauss-Kronrod
  const double b = 1.0 + 1e-9;
  EXPECT_NEAR(quad::integrate([](double) { return 1.0; }, 1.0, b, opt).value, b - 1.0, 1e-24);
}

TEST(Rkhs, Identity)
{
  Density f(make_normal_location(1), 0.4);
  EXPECT_EQ(rkhs_distance(f, f, KernelSpec::gaussian(0.5)), 0.0);
}

TEST(Rkhs, GaussianConvolutionIdentity)
{
  const double b = 0.7, s = std::sqrt(1 + b * b);
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 1.0);
  auto phi = [&](double x, double m) {
    return std::exp(-0.5 * sq((x - m) / s)) / (s * std::sqrt(2 * std::numbers::pi));
  };
  double oracle = line_integral([&](double x) { return sq(phi(x, 0.0) - phi(x, 1.0)); }, 0.5);
  EXPECT_NEAR(sq(rkhs_distance(f, g, KernelSpec::gaussian(b))), oracle, 1e-12);
  EXPECT_NEAR(sq(rkhs_distance(f, g, KernelSpec::gaussian(b), Evaluation::Quadrature)), oracle, 1e-9);
}

TEST(Rkhs, SmallBandwidthApproachesL2)
{
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 1.0);
  double r = rkhs_distance(f, g, KernelSpec::gaussian(0.01));
  EXPECT_NEAR(r / l2_distance(f, g), 1.0, 0.01);
}

TEST(Rkhs, TriweightMatchesQuadratureOfSmoothedDensities)
{
  auto fam = make_gamma_scale(2.0);
  Density f(fam, 1.0), g(fam, 1.5);
  const auto k = KernelSpec::triweight(0.4);
  // (K_b * f)(y): smoothing kernel is the triweight; the RKHS norm is the
  // L2 norm of the smoothed difference.
  boost::math::quadrature::tanh_sinh<double> ts;
  auto smoothed = [&](double y) {
    double lo = std::max(0.0, y - 0.4), hi = y + 0.4;
    if (hi <= 0.0)
      return 0.0;
    return ts.integrate([&](double x) { return k.smoothing(y - x) * (pdf(f, x) - pdf(g, x)); }, lo, hi);
  };
  double oracle = ts.integrate([&](double y) { return sq(smoothed(y)); }, -0.4, 0.0) +
                  ts.integrate([&](double y) { return sq(smoothed(y)); }, 0.0, 60.0);
  EXPECT_NEAR(sq(rkhs_distance(f, g, k)) / oracle, 1.0, 1e-6);
}

TEST(Hellinger, NormalPair)
{
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 2.0);
  double expected = 2 - 2 * std::exp(-0.5);
  EXPECT_NEAR(squared_dissimilarity(f, g, DissimilaritySpec::hellinger()), expected, 1e-15);
  double oracle = line_integral([&](double x) { return sq(std::sqrt(pdf(f, x)) - std::sqrt(pdf(g, x))); }, 1.0);
  EXPECT_NEAR(oracle, expected, 1e-10);
  EXPECT_NEAR(f_divergence(f, g, Psi::hellinger()), expected, 1e-10);
}

TEST(Hellinger, ExpFamIdentityAndNormal)
{
  auto nat = make_natural_normal();
  EXPECT_EQ(hellinger_expfam(nat, Vector::Constant(1, 0.7), Vector::Constant(1, 0.7)), 0.0);
  EXPECT_NEAR(hellinger_expfam(nat, Vector::Constant(1, 0.0), Vector::Constant(1, 2.0)),
              2 - 2 * std::exp(-0.5), 1e-15);
}

TEST(Hellinger, ExpFamPoissonAgainstSum)
{
  double oracle = 0.0;
  for (int x = 0; x < 100; ++x) {
    double p = std::exp(-1.0 - std::lgamma(x + 1.0));
    double q = std::exp(x - std::numbers::e - std::lgamma(x + 1.0));
    oracle += sq(std::sqrt(p) - std::sqrt(q));
  }
  EXPECT_NEAR(hellinger_expfam(make_poisson(), Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)),
              oracle, 1e-14);
}

TEST(SymKL, NaturalNormal)
{
  Density f(make_natural_normal(), 0.0), g(make_natural_normal(), 2.0);
  EXPECT_NEAR(squared_dissimilarity(f, g, DissimilaritySpec::symkl()), 4.0, 1e-15);
  EXPECT_NEAR(f_divergence(f, g, Psi::kl()), 4.0, 1e-9);
}

TEST(SymKL, UniformDisjointRegionIsInfinite)
{
  auto fam = make_uniform_location();
  Density f(fam, 0.0), g(fam, 0.5);
  EXPECT_TRUE(std::isinf(squared_dissimilarity(f, g, DissimilaritySpec::symkl())));
  EXPECT_TRUE(std::isinf(f_divergence(f, g, Psi::kl())));
}

TEST(FDivergence, TotalVariationOfShiftedUniforms)
{
  // psi(t) = |t - 1| / 2 symmetrized: int |f - g|
  auto fam = make_uniform_location();
  EXPECT_NEAR(f_divergence(Density(fam, 0.0), Density(fam, 0.25), Psi::total_variation()), 0.5, 1e-10);
}

TEST(FDivergence, NonConvexPsiRejected)
{
  EXPECT_THROW(Psi::custom("concave", [](double t) { return -(t - 1) * (t - 1); }, -1.0, -inf), SpecError);
  EXPECT_THROW(Psi::custom("offset", [](double t) { return (t - 1) * (t - 1) + 0.1; }, 1.1, inf), SpecError);
}

TEST(W2, NormalShift)
{
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 2.0);
  EXPECT_DOUBLE_EQ(w2_distance(f, g), 2.0);
  EXPECT_NEAR(w2_distance(f, g, Evaluation::Quadrature), 2.0, 1e-9);
  EXPECT_EQ(w2_distance(f, f), 0.0);
}

TEST(W2, PowerWarpPolynomial)
{
  auto fam = make_time_warp_power();
  Density f(fam, 1.0), g(fam, 2.0);
  EXPECT_NEAR(sq(w2_distance(f, g)), 1.0 / 30.0, 1e-15);
  EXPECT_NEAR(sq(w2_distance(f, g, Evaluation::Quadrature)), 1.0 / 30.0, 1e-12);
}

TEST(W2, LocationScaleAgainstQuantileIntegral)
{
  boost::math::quadrature::tanh_sinh<double> ts;
  auto fam = make_location_scale(BaseShape::Laplace);
  Vector a(2), b(2);
  a << 0.5, 1.0;
  b << -1.0, 2.5;
  Density f(fam, a), g(fam, b);
  double oracle = ts.integrate([&](double u) { return sq(quantile_1d(f, u) - quantile_1d(g, u)); }, 0.0, 1.0);
  EXPECT_NEAR(sq(w2_distance(f, g)), oracle, 1e-9);
}

TEST(W2, PoissonDiscrete)
{
  // Midpoint rule in u over step quantile functions found by cdf search.
  auto quantile = [](double mean, double u) {
    double p = std::exp(-mean), c = p;
    int k = 0;
    while (c < u) {
      ++k;
      p *= mean / k;
      c += p;
    }
    return static_cast<double>(k);
  };
  const int n = 200000;
  double oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = (i + 0.5) / n;
    oracle += sq(quantile(1.0, u) - quantile(std::numbers::e, u)) / n;
  }
  Density f(make_poisson(), 0.0), g(make_poisson(), 1.0);
  EXPECT_NEAR(sq(w2_distance(f, g)), oracle, 1e-4);
}

TEST(Pairwise, IdenticalDensitiesGiveZeroMatrix)
{
  std::vector<Density> qs(3, Density(make_normal_location(1), 0.3));
  auto m = pairwise_matrix(qs, DissimilaritySpec::l2());
  EXPECT_EQ(m.values.norm(), 0.0);
}

TEST(Pairwise, HellingerGrid)
{
  auto fam = make_normal_location(1);
  std::vector<Density> qs{ Density(fam, 0.0), Density(fam, 1.0), Density(fam, 2.0) };
  auto m = pairwise_matrix(qs, DissimilaritySpec::hellinger());
  EXPECT_NEAR(sq(m(0, 2)), 2 - 2 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(sq(m(0, 1)), 2 - 2 * std::exp(-0.125), 1e-15);
  EXPECT_NEAR(sq(m(1, 2)), 2 - 2 * std::exp(-0.125), 1e-15);
  EXPECT_EQ(m.metric_flag.state, TriangleCheck::State::Holds);
  m.validate();
}

TEST(Pairwise, SymKLPoissonTriangleScan)
{
  auto fam = make_poisson();
  std::vector<Density> qs{ Density(fam, -2.0), Density(fam, 0.0), Density(fam, 2.0) };
  auto m = pairwise_matrix(qs, DissimilaritySpec::symkl(), {}, TriangleScan::Always);
  std::size_t brute = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        brute += k != i && k != j && m(i, j) > (m(i, k) + m(k, j)) * (1 + 1e-12);
  EXPECT_EQ(m.metric_flag.violations, brute);
  EXPECT_EQ(m.metric_flag.state, brute ? TriangleCheck::State::Violated : TriangleCheck::State::Holds);
}

TEST(Pairwise, MixedFamiliesRejected)
{
  std::vector<Density> qs{ Density(make_normal_location(1), 0.0), Density(make_uniform_location(), 0.0) };
  EXPECT_THROW(pairwise_matrix(qs, DissimilaritySpec::l2()), UnsupportedError);
}

TEST(Constants, PinnedAgainstQuadrature)
{
  // ||f_t - f_s||^2 / (1 - exp(-|t-s|^2/4)) for the 1-D normal
  Density f(make_normal_location(1), 0.0), g(make_normal_location(1), 1.0);
  double q = line_integral([&](double x) { return sq(pdf(f, x) - pdf(g, x)); }, 0.5);
  EXPECT_NEAR(q / (1 - std::exp(-0.25)), constants::l2_normal(1), 1e-10);
  EXPECT_NEAR(constants::l2_normal(2), 2 / (4 * std::numbers::pi), 1e-15);
}
