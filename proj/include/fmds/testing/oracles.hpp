#pragma once

// Brute-force reference computations used by the unit tests and the
// acceptance suites. Deliberately naive; none of this is on a hot path.

#include "../dissimilarity_matrix.hpp"
#include "../isomap.hpp"
#include "../mds.hpp"
#include "../models.hpp"
#include "../rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace fmds::oracle {

//! All-pairs shortest paths by Floyd-Warshall over the graph's edges.
inline Matrix floyd_warshall(const NeighborhoodGraph& g)
{
  const std::size_t n = g.size();
  Matrix d = Matrix::Constant(n, n, inf);
  for (std::size_t i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (const auto& e : g.adjacency[i])
      d(i, e.to) = std::min(d(i, e.to), e.weight);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d(i, k) + d(k, j) < d(i, j))
          d(i, j) = d(i, k) + d(k, j);
  return d;
}

//! min over permutations s of sqrt(mean (x_i - y_s(i))^2), by enumeration.
inline double assignment_w2(std::vector<double> x, const std::vector<double>& y)
{
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = inf;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      s += (x[i] - y[perm[i]]) * (x[i] - y[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(x.size()));
}

//! Same quantity by the Hungarian method (potentials form, O(n^3)), for
//! sizes where enumeration is out of reach.
inline double hungarian_w2(const std::vector<double>& x, const std::vector<double>& y)
{
  const std::size_t n = x.size();
  auto cost = [&](std::size_t i, std::size_t j) { return (x[i - 1] - y[j - 1]) * (x[i - 1] - y[j - 1]); };
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = match[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  double s = 0.0;
  for (std::size_t j = 1; j <= n; ++j)
    s += cost(match[j], j);
  return std::sqrt(s / static_cast<double>(n));
}

//! Euclidean distance matrix of the rows of `points`.
inline DissimilarityMatrix euclidean_matrix(const Matrix& points)
{
  const auto n = points.rows();
  DissimilarityMatrix m;
  for (Eigen::Index i = 0; i < n; ++i)
    m.labels.push_back("p" + std::to_string(i));
  m.values = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      m.values(i, j) = m.values(j, i) = (points.row(i) - points.row(j)).norm();
  return m;
}

//! n x d matrix of independent standard normal entries.
inline Matrix gaussian_points(CounterRng& rng, Eigen::Index n, Eigen::Index d)
{
  Matrix p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      p(i, j) = detail::std_normal_quantile(rng.next_open01());
  return p;
}

//! Full eigendecomposition of B, eigenvalues in descending order.
inline Vector descending_spectrum(const Matrix& b)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

//! Strain of the best rank-k PSD approximation by Eckart-Young: the sum of
//! squares of every eigenvalue except the positive parts of the top k.
inline double eckart_young_strain(const Matrix& b, int k)
{
  Vector ev = descending_spectrum(b);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    double kept = i < k ? std::max(ev[i], 0.0) : 0.0;
    s += (ev[i] - kept) * (ev[i] - kept);
  }
  return s;
}

//! Procrustes residual by a grid search over rotation angles (2-D, with and
//! without reflection), translation matched by centering.
inline double procrustes_grid_2d(const Matrix& x, const Matrix& y, int steps = 20000)
{
  Vector mx = x.colwise().mean().transpose(), my = y.colwise().mean().transpose();
  Matrix xc = x.rowwise() - mx.transpose(), yc = y.rowwise() - my.transpose();
  double best = inf;
  for (int refl = 0; refl < 2; ++refl)
    for (int s = 0; s < steps; ++s) {
      double a = 2 * std::numbers::pi * s / steps;
      Eigen::Matrix2d r;
      r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      if (refl)
        r.col(1) *= -1.0;
      best = std::min(best, (xc - yc * r.transpose()).squaredNorm());
    }
  return best;
}

} // namespace fmds::oracle
