#pragma once

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <limits>
#include <vector>

namespace fmds {

//! Points p_i in R^{d_e} from a spectral embedding. `eigenvalues` keeps the
//! top d_e raw values (negatives included); `spectrum` the full descending
//! spectrum of B. Coordinates use the positive parts.
struct Embedding
{
  std::vector<std::string> labels;
  Matrix coords;
  Vector eigenvalues;
  Vector spectrum;
  int requested_dim = 0;

  std::size_t size() const { return labels.size(); }
};

//! B = -1/2 J A2 J for the matrix of squared dissimilarities A2.
inline Matrix double_center_squared(const Matrix& a2)
{
  const Eigen::Index n = a2.rows();
  Matrix a = -0.5 * a2;
  Vector row = a.rowwise().mean();
  Vector col = a.colwise().mean().transpose();
  double all = a.mean();
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      b(i, j) = a(i, j) - row[i] - col[j] + all;
  // Exact symmetry; rounding in the means can leave 1-ulp asymmetries.
  return 0.5 * (b + b.transpose());
}

//! a_ij = -1/2 delta_ij^2, then b_ij = a_ij - a_i. - a_.j + a_..
inline Matrix double_center(const DissimilarityMatrix& d)
{
  const auto n = static_cast<Eigen::Index>(d.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (!std::isfinite(d.values(i, j)))
        throw DomainError("double_center: entry (" + d.labels[i] + ", " + d.labels[j] +
                          ") is not finite");
  return double_center_squared(d.values.array().square().matrix());
}

namespace detail {

//! Largest-magnitude entry made positive; ties go to the lowest index.
inline void fix_sign(Eigen::Ref<Vector> v)
{
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best]))
      best = i;
  if (v.size() && v[best] < 0)
    v = -v;
}

} // namespace detail

//! Top-d_e spectral embedding of a symmetric matrix B:
//! p_i = (sqrt(nu_1^+) u_i1, ..., sqrt(nu_de^+) u_i,de).
inline Embedding spectral_embedding(const Matrix& b, int d_e, std::vector<std::string> labels)
{
  const auto n = b.rows();
  if (d_e < 1 || d_e > n)
    throw DomainError("embedding dimension must satisfy 1 <= d_e <= n (d_e = " +
                      std::to_string(d_e) + ", n = " + std::to_string(n) + ")");
  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success)
    throw NumericError("symmetric eigensolver did not converge");
  // Eigen returns ascending eigenvalues.
  Embedding e;
  e.labels = std::move(labels);
  e.requested_dim = d_e;
  e.spectrum = es.eigenvalues().reverse();
  e.eigenvalues = e.spectrum.head(d_e);
  e.coords.resize(n, d_e);
  // Eigenvalues below the solver's absolute accuracy carry eigenvectors
  // that are pure roundoff; they contribute zero coordinates.
  const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() *
                       es.eigenvalues().cwiseAbs().maxCoeff();
  for (int k = 0; k < d_e; ++k) {
    Vector u = es.eigenvectors().col(n - 1 - k);
    detail::fix_sign(u);
    double lam = e.eigenvalues[k] > floor ? e.eigenvalues[k] : 0.0;
    e.coords.col(k) = std::sqrt(lam) * u;
  }
  return e;
}

inline Embedding classical_scaling(const DissimilarityMatrix& d, int d_e)
{
  return spectral_embedding(double_center(d), d_e, d.labels);
}

//! Centered Gram matrix J G J with G_ij = <q_i, q_j>. Equals the double
//! centering of the L2 distance matrix.
inline Matrix gram_from_densities(const std::vector<Density>& qs, Evaluation ev = Evaluation::Auto)
{
  const std::size_t n = qs.size();
  Matrix g(n, n);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      pairs.emplace_back(i, j);
  std::vector<double> vals(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    vals[p] = l2_inner_product(qs[pairs[p].first], qs[pairs[p].second], ev);
  });
  for (std::size_t p = 0; p < pairs.size(); ++p)
    g(pairs[p].first, pairs[p].second) = g(pairs[p].second, pairs[p].first) = vals[p];
  Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
  Matrix b = j * g * j;
  return 0.5 * (b + b.transpose());
}

namespace detail {

//! Sum over rows of f(i), per-row partials added in index order.
template <class F>
double row_sum(std::size_t n, F&& f)
{
  std::vector<double> partial(n);
  parallel_for(n, [&](std::size_t i) { partial[i] = f(i); });
  double s = 0.0;
  for (double p : partial)
    s += p;
  return s;
}

} // namespace detail

//! sum over ordered pairs (i, j) of | ||p_i - p_j||^2 - delta_ij^2 |.
inline double stress(const DissimilarityMatrix& d, const Matrix& coords)
{
  if (coords.rows() != static_cast<Eigen::Index>(d.size()))
    throw DomainError("stress: coordinate rows do not match the matrix size");
  return detail::row_sum(d.size(), [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      double e2 = (coords.row(i) - coords.row(j)).squaredNorm();
      s += std::abs(e2 - d.values(i, j) * d.values(i, j));
    }
    return s;
  });
}

//! sum over (i, j) of (<p_i, p_j> - b_ij)^2.
inline double strain(const Matrix& b, const Matrix& coords)
{
  if (coords.rows() != b.rows() || b.rows() != b.cols())
    throw DomainError("strain: shapes do not agree");
  return detail::row_sum(static_cast<std::size_t>(b.rows()), [&](std::size_t i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double r = coords.row(i).dot(coords.row(j)) - b(i, j);
      s += r * r;
    }
    return s;
  });
}

struct SchoenbergResult
{
  bool is_hilbertian = false;
  double min_eigenvalue = 0.0;
  double spectral_norm = 0.0; // max |eigenvalue| of B
  int numerical_rank = 0;     // eigenvalues above 1e-8 ||B||
};

//! B PSD within -1e-8 ||B|| (spectral norm).
inline SchoenbergResult schoenberg_check(const DissimilarityMatrix& d)
{
  Matrix b = double_center(d);
  SchoenbergResult r;
  if (b.rows() == 0) {
    r.is_hilbertian = true;
    return r;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("symmetric eigensolver did not converge");
  const Vector& ev = es.eigenvalues();
  r.min_eigenvalue = ev.minCoeff();
  r.spectral_norm = ev.cwiseAbs().maxCoeff();
  r.is_hilbertian = r.min_eigenvalue >= -1e-8 * r.spectral_norm;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > 1e-8 * r.spectral_norm)
      ++r.numerical_rank;
  return r;
}

struct ProcrustesResult
{
  Matrix aligned; // R y_i + t, one row per point
  double residual = 0.0;
  Matrix rotation; // orthogonal, reflections allowed
  Vector translation;
};

//! Rigid motion (rotation, reflection, translation; no scaling) of Y that
//! best matches X in least squares. Narrower inputs are padded with zero
//! columns.
inline ProcrustesResult procrustes_align(const Matrix& x_in, const Matrix& y_in)
{
  if (x_in.rows() != y_in.rows())
    throw DomainError("procrustes_align: point counts differ");
  const auto n = x_in.rows();
  const auto dim = std::max(x_in.cols(), y_in.cols());
  Matrix x = Matrix::Zero(n, dim), y = Matrix::Zero(n, dim);
  x.leftCols(x_in.cols()) = x_in;
  y.leftCols(y_in.cols()) = y_in;
  ProcrustesResult r;
  if (n == 0) {
    r.rotation = Matrix::Identity(dim, dim);
    r.translation = Vector::Zero(dim);
    r.aligned = y;
    return r;
  }
  Vector mx = x.colwise().mean().transpose(), my = y.colwise().mean().transpose();
  Matrix xc = x.rowwise() - mx.transpose(), yc = y.rowwise() - my.transpose();
  Eigen::JacobiSVD<Matrix> svd(yc.transpose() * xc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Maximizes trace(R' Yc' Xc) over orthogonal R; rank deficiency leaves a
  // non-unique R but the residual is unaffected.
  Matrix rot = svd.matrixU() * svd.matrixV().transpose(); // y-row * rot ~ x-row
  r.rotation = rot.transpose();
  r.aligned = (yc * rot).rowwise() + mx.transpose();
  r.translation = mx - r.rotation * my;
  r.residual = (x - r.aligned).squaredNorm();
  return r;
}

inline double procrustes_residual(const Matrix& x, const Matrix& y)
{
  return procrustes_align(x, y).residual;
}

//! `id,coord_1,...,coord_de` then one row per point.
inline void write_embedding_csv(std::ostream& os, const Embedding& e)
{
  os << "id";
  for (Eigen::Index k = 0; k < e.coords.cols(); ++k)
    os << ",coord_" << (k + 1);
  os << '\n';
  for (std::size_t i = 0; i < e.size(); ++i) {
    os << e.labels[i];
    for (Eigen::Index k = 0; k < e.coords.cols(); ++k)
      os << ',' << format_double(e.coords(i, k));
    os << '\n';
  }
}

inline void write_embedding_csv(const std::string& path, const Embedding& e)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + path + "' for writing");
  write_embedding_csv(os, e);
}

} // namespace fmds
