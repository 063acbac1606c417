#include <fmds/isomap.hpp>
#include <fmds/metrics.hpp>
#include <fmds/testing/oracles.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fmds;

namespace {

DissimilarityMatrix grid_line(std::size_t n, double step)
{
  Matrix p(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    p(i, 0) = step * static_cast<double>(i);
  return oracle::euclidean_matrix(p);
}

} // namespace

TEST(BuildGraph, CompleteAndEmpty)
{
  CounterRng rng(1);
  auto d = oracle::euclidean_matrix(oracle::gaussian_points(rng, 7, 2));
  auto full = build_graph(d, d.values.maxCoeff());
  EXPECT_EQ(full.edge_count(), 21u);
  EXPECT_EQ(full.component_count, 1u);
  double min_pos = inf;
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = i + 1; j < 7; ++j)
      min_pos = std::min(min_pos, d.values(i, j));
  auto none = build_graph(d, 0.5 * min_pos);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(none.component_count, 7u);
}

TEST(BuildGraph, PathGraph)
{
  auto g = build_graph(grid_line(11, 0.1), 0.15);
  EXPECT_EQ(g.edge_count(), 10u);
  EXPECT_EQ(g.component_count, 1u);
  EXPECT_EQ(g.max_degree(), 2u);
}

TEST(BuildGraph, RadiusMustBePositive)
{
  EXPECT_THROW(build_graph(grid_line(3, 1.0), 0.0), DomainError);
}

TEST(BuildKnnGraph, SymmetrizedUnion)
{
  // points 0, 1, 10: the 1-NN of 10 is 1, so 1-10 is an edge.
  Matrix p(3, 1);
  p << 0, 1, 10;
  auto g = build_knn_graph(oracle::euclidean_matrix(p), 1);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_TRUE(g.connected());
}

TEST(ShortestPaths, CompleteMetricGraph)
{
  CounterRng rng(2);
  auto d = oracle::euclidean_matrix(oracle::gaussian_points(rng, 9, 3));
  auto sp = shortest_paths(build_graph(d, inf));
  EXPECT_NEAR((sp.values - d.values).norm(), 0.0, 1e-12);
}

TEST(ShortestPaths, UnitPath)
{
  auto sp = shortest_paths(build_graph(grid_line(3, 1.0), 1.0));
  EXPECT_DOUBLE_EQ(sp(0, 2), 2.0);
}

TEST(ShortestPaths, FloydWarshallOnRandomSparseGraph)
{
  CounterRng rng(8);
  const int n = 50;
  Matrix v = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      v(i, j) = v(j, i) = std::floor(1 + 100 * rng.next_open01());
  DissimilarityMatrix d;
  for (int i = 0; i < n; ++i)
    d.labels.push_back(std::to_string(i));
  d.values = v;
  auto g = build_graph(d, 15.0);
  Matrix fw = oracle::floyd_warshall(g);
  auto sp = shortest_paths(g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      EXPECT_EQ(sp(i, j), fw(i, j));
}

TEST(Isomap, LineRecovered)
{
  auto d = grid_line(40, 0.25);
  auto r = isomap_embed(d, 0.3, 1);
  Matrix truth(40, 1);
  for (int i = 0; i < 40; ++i)
    truth(i, 0) = 0.25 * i;
  EXPECT_LT(procrustes_residual(r.embedding.coords, truth), 1e-16);
  EXPECT_LT(stress(r.geodesics, r.embedding.coords), 1e-8);
}

TEST(Isomap, HellingerGridFollowsHalfTheta)
{
  const int n = 500;
  auto fam = make_normal_location(1);
  std::vector<Density> qs;
  Matrix half(n, 1);
  for (int i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / n;
    qs.emplace_back(fam, Vector::Constant(1, t));
    half(i, 0) = 0.5 * t;
  }
  auto r = isomap_embed(pairwise_matrix(qs, DissimilaritySpec::hellinger()), 0.05, 1);
  double rms = std::sqrt(procrustes_residual(r.embedding.coords, half) / n);
  EXPECT_LT(rms, 1e-3);
}

TEST(Isomap, DisconnectedClustersListed)
{
  Matrix p(4, 1);
  p << 0, 0.1, 5, 5.1;
  auto d = oracle::euclidean_matrix(p);
  try {
    isomap_embed(d, 0.5, 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("2 components"), std::string::npos) << msg;
    EXPECT_NE(msg.find("p0"), std::string::npos);
    EXPECT_NE(msg.find("p2"), std::string::npos);
  }
  auto r = isomap_embed(d, 0.5, 1, DisconnectionPolicy::LargestComponent);
  EXPECT_EQ(r.geodesics.size(), 2u);
  EXPECT_EQ(r.diagnostics.dropped_labels.size(), 2u);
}

TEST(Isomap, SmallestConnectingRadius)
{
  Matrix p(4, 1);
  p << 0, 0.3, 1.0, 1.2;
  auto d = oracle::euclidean_matrix(p);
  double r = smallest_connecting_radius(d);
  EXPECT_NEAR(r, 0.7, 1e-15);
  EXPECT_TRUE(build_graph(d, r).connected());
  EXPECT_FALSE(build_graph(d, 0.69).connected());
}

TEST(Isomap, EdgeListFormat)
{
  auto g = build_graph(grid_line(3, 1.0), 1.0);
  std::ostringstream os;
  write_edge_list(os, g);
  EXPECT_EQ(os.str(), "i,j,weight\n0,1,1\n1,2,1\n");
}
