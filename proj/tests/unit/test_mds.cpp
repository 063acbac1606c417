#include <fmds/mds.hpp>
#include <fmds/testing/oracles.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace fmds;

namespace {

DissimilarityMatrix matrix(const Matrix& v)
{
  DissimilarityMatrix m;
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    m.labels.push_back("x" + std::to_string(i));
  m.values = v;
  return m;
}

DissimilarityMatrix line(std::vector<double> x)
{
  Matrix p(x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    p(i, 0) = x[i];
  return oracle::euclidean_matrix(p);
}

Matrix two_point(double d)
{
  Matrix v(2, 2);
  v << 0, d, d, 0;
  return v;
}

} // namespace

TEST(DoubleCenter, ZeroMatrix)
{
  EXPECT_EQ(double_center(matrix(Matrix::Zero(4, 4))).norm(), 0.0);
}

TEST(DoubleCenter, TwoPoints)
{
  Matrix want(2, 2);
  want << 1, -1, -1, 1;
  EXPECT_NEAR((double_center(matrix(two_point(2.0))) - want).norm(), 0.0, 1e-15);
}

TEST(DoubleCenter, CollinearGram)
{
  Vector x(3);
  x << 0, 1, 3;
  Vector c = x.array() - x.mean();
  Matrix gram = c * c.transpose();
  EXPECT_NEAR((double_center(line({ 0, 1, 3 })) - gram).norm(), 0.0, 1e-14);
}

TEST(DoubleCenter, InfiniteEntryRejected)
{
  Matrix v = two_point(inf);
  EXPECT_THROW(double_center(matrix(v)), DomainError);
}

TEST(ClassicalScaling, TwoPoints)
{
  Embedding e = classical_scaling(matrix(two_point(2.0)), 1);
  EXPECT_NEAR(e.eigenvalues[0], 2.0, 1e-14);
  EXPECT_NEAR(std::abs(e.coords(0, 0)), 1.0, 1e-14);
  EXPECT_NEAR(e.coords(0, 0), -e.coords(1, 0), 1e-14);
}

TEST(ClassicalScaling, LineRecovered)
{
  std::vector<double> x{ 0.0, 0.4, 1.1, 2.0, 3.7 };
  auto d = line(x);
  Embedding e = classical_scaling(d, 1);
  Matrix truth(x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    truth(i, 0) = x[i];
  EXPECT_LT(procrustes_residual(e.coords, truth), 1e-20);
  EXPECT_LT(stress(d, e.coords), 1e-12);
}

TEST(ClassicalScaling, StrainEqualsDiscardedSpectrum)
{
  auto fam = make_normal_location(1);
  std::vector<Density> qs;
  for (double t : { 0.0, 0.7, 1.5, 3.0 })
    qs.emplace_back(fam, Vector::Constant(1, t));
  auto d = pairwise_matrix(qs, DissimilaritySpec::hellinger());
  Matrix b = double_center(d);
  Embedding e4 = classical_scaling(d, 4);
  EXPECT_NEAR(strain(b, e4.coords), oracle::eckart_young_strain(b, 4), 1e-14);
  Embedding e2 = classical_scaling(d, 2);
  EXPECT_NEAR(strain(b, e2.coords), oracle::eckart_young_strain(b, 2), 1e-14);
}

TEST(ClassicalScaling, DimensionChecked)
{
  EXPECT_THROW(classical_scaling(matrix(two_point(1.0)), 3), DomainError);
  EXPECT_THROW(classical_scaling(matrix(two_point(1.0)), 0), DomainError);
}

TEST(GramFromDensities, IdenticalDensities)
{
  std::vector<Density> qs(3, Density(make_normal_location(1), 0.2));
  EXPECT_LT(gram_from_densities(qs).norm(), 1e-15);
}

TEST(GramFromDensities, NormalInnerProducts)
{
  auto fam = make_normal_location(1);
  std::vector<double> t{ -0.5, 0.3, 1.2 };
  std::vector<Density> qs;
  for (double v : t)
    qs.emplace_back(fam, Vector::Constant(1, v));
  Matrix g(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      g(i, j) = std::exp(-(t[i] - t[j]) * (t[i] - t[j]) / 4) / (2 * std::sqrt(std::numbers::pi));
  Matrix jm = Matrix::Identity(3, 3) - Matrix::Constant(3, 3, 1.0 / 3);
  EXPECT_NEAR((gram_from_densities(qs, Evaluation::Quadrature) - jm * g * jm).norm(), 0.0, 1e-12);
  auto d = pairwise_matrix(qs, DissimilaritySpec::l2());
  EXPECT_NEAR((gram_from_densities(qs) - double_center(d)).norm(), 0.0, 1e-8);
}

TEST(Stress, Examples)
{
  auto d = line({ 0.0, 1.0, 2.5 });
  Matrix p(3, 1);
  p << 0, 1, 2.5;
  EXPECT_NEAR(stress(d, p), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(stress(matrix(two_point(2.0)), Matrix::Zero(2, 1)), 8.0);
}

TEST(Stress, TailOfEuclideanSpectrum)
{
  // For Euclidean input, truncating CS leaves squared distances short by
  // the discarded coordinates; summed over ordered pairs this is
  // 2 n * sum of discarded eigenvalues.
  CounterRng rng(5);
  Matrix p = oracle::gaussian_points(rng, 12, 4);
  auto d = oracle::euclidean_matrix(p);
  Vector ev = oracle::descending_spectrum(double_center(d));
  Embedding e = classical_scaling(d, 2);
  double want = 2.0 * 12 * (ev[2] + ev[3]);
  EXPECT_NEAR(stress(d, e.coords), want, 1e-10 * want);
}

TEST(Strain, Definition)
{
  CounterRng rng(9);
  Matrix p = oracle::gaussian_points(rng, 6, 3);
  auto d = oracle::euclidean_matrix(p);
  Matrix b = double_center(d);
  EXPECT_NEAR(strain(b, classical_scaling(d, 3).coords), 0.0, 1e-20);
  EXPECT_NEAR(strain(b, Matrix::Zero(6, 2)), b.squaredNorm(), 1e-12);
}

TEST(Strain, CsBeatsRandomConfigurations)
{
  CounterRng rng(17);
  auto fam = make_normal_location(2);
  std::vector<Density> qs;
  for (int i = 0; i < 10; ++i)
    qs.emplace_back(fam, oracle::gaussian_points(rng, 1, 2).row(0).transpose().eval());
  auto d = pairwise_matrix(qs, DissimilaritySpec::hellinger());
  Matrix b = double_center(d);
  double cs = strain(b, classical_scaling(d, 2).coords);
  for (int t = 0; t < 100; ++t)
    EXPECT_LE(cs, strain(b, 0.3 * oracle::gaussian_points(rng, 10, 2)));
}

TEST(Schoenberg, EuclideanIsHilbertian)
{
  CounterRng rng(3);
  auto r = schoenberg_check(oracle::euclidean_matrix(oracle::gaussian_points(rng, 15, 3)));
  EXPECT_TRUE(r.is_hilbertian);
  EXPECT_EQ(r.numerical_rank, 3);
}

TEST(Schoenberg, StretchedSquare)
{
  Matrix v = Matrix::Ones(4, 4);
  v.diagonal().setZero();
  v(0, 2) = v(2, 0) = v(1, 3) = v(3, 1) = 1.9;
  auto r = schoenberg_check(matrix(v));
  EXPECT_FALSE(r.is_hilbertian);
  EXPECT_NEAR(r.min_eigenvalue, oracle::descending_spectrum(double_center(matrix(v))).minCoeff(), 1e-14);
}

TEST(Schoenberg, HellingerGridHilbertian)
{
  auto fam = make_normal_location(1);
  std::vector<Density> qs;
  for (int i = 0; i < 20; ++i)
    qs.emplace_back(fam, Vector::Constant(1, 0.2 * i));
  EXPECT_TRUE(schoenberg_check(pairwise_matrix(qs, DissimilaritySpec::hellinger())).is_hilbertian);
}

TEST(Procrustes, RigidMotionAndReflection)
{
  CounterRng rng(21);
  Matrix x = oracle::gaussian_points(rng, 8, 2);
  double a = 0.9;
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  Matrix y = (x * r.transpose()).rowwise() + Eigen::RowVector2d(3.0, -1.0);
  EXPECT_NEAR(procrustes_residual(x, y), 0.0, 1e-20);
  Matrix z = x;
  z.col(0) *= -1.0;
  EXPECT_NEAR(procrustes_residual(x, z), 0.0, 1e-20);
  auto res = procrustes_align(x, y);
  EXPECT_NEAR((res.aligned - x).norm(), 0.0, 1e-12);
}

TEST(Procrustes, SegmentsAgainstGridSearch)
{
  Matrix x(2, 2), y(2, 2);
  x << 0, 0, 1, 0;
  y << 0, 0, 3, 0;
  double want = oracle::procrustes_grid_2d(x, y);
  EXPECT_NEAR(want, 2.0, 1e-9);
  EXPECT_NEAR(procrustes_residual(x, y), want, 1e-9);
}
