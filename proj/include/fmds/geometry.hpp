#pragma once

#include "error.hpp"
#include "metrics.hpp"
#include "models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace fmds {

enum class TensorKind
{
  Fisher,
  L2Info,
  RkhsInfo,
  WassersteinInfo1D,
  Custom
};

//! theta -> A(theta), a symmetric positive-definite p x p matrix.
struct MetricTensorField
{
  TensorKind kind = TensorKind::Custom;
  int param_dim = 1;
  std::function<Matrix(const Vector&)> evaluator;
  std::optional<KernelSpec> kernel; // RkhsInfo only

  //! Evaluates and checks symmetry (exact, after symmetrization) and
  //! positive definiteness.
  Matrix operator()(const Vector& theta) const
  {
    Matrix a = evaluator(theta);
    if (a.rows() != param_dim || a.cols() != param_dim)
      throw ModelError("metric tensor has the wrong shape");
    a = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
      throw ModelError("metric tensor is not positive definite at the evaluated theta");
    return a;
  }

  static MetricTensorField constant(const Matrix& a)
  {
    return { TensorKind::Custom, static_cast<int>(a.rows()), [a](const Vector&) { return a; } };
  }

  //! c * A(theta).
  MetricTensorField scaled(double c) const
  {
    MetricTensorField out = *this;
    auto ev = evaluator;
    out.evaluator = [ev, c](const Vector& t) { return Matrix(c * ev(t)); };
    return out;
  }
};

namespace detail {

inline void require_interior(const FamilySpec& fam, const Vector& theta, double h, const char* op)
{
  if (theta.size() != fam.param_dim())
    throw DomainError(std::string(op) + ": theta has the wrong dimension");
  if (!fam.parameter_space.interior(theta))
    throw DomainError(std::string(op) + ": theta must be interior to the parameter space");
  for (int j = 0; j < theta.size(); ++j) {
    Vector t = theta;
    t[j] += h;
    Vector s = theta;
    s[j] -= h;
    if (!fam.parameter_space.interior(t) || !fam.parameter_space.interior(s))
      throw DomainError(std::string(op) + ": theta is too close to the boundary");
  }
}

inline double fd_step(const Vector& theta, int j) { return 1e-5 * std::max(1.0, std::abs(theta[j])); }

inline void refuse_nondifferentiable(const FamilySpec& fam, const char* op)
{
  if (fam.as<UniformLocation1D>())
    throw UnsupportedError(std::string(op) +
                           ": UniformLocation1D is not differentiable in theta (its support moves "
                           "with theta, so delta^2 grows like |theta - theta0|)");
}

//! (density at theta + h e_j, density at theta - h e_j, h) for each j.
inline std::vector<std::pair<Density, Density>> fd_pairs(const FamilySpec& fam, const Vector& theta,
                                                         std::vector<double>& steps)
{
  std::vector<std::pair<Density, Density>> out;
  steps.clear();
  for (int j = 0; j < theta.size(); ++j) {
    double h = fd_step(theta, j);
    Vector tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    out.emplace_back(Density(fam, tp), Density(fam, tm));
    steps.push_back(h);
  }
  return out;
}

} // namespace detail

//! I(theta) = int grad f grad f' / f. Exponential families return the
//! Hessian of Lambda; NormalLocation the identity; other one-dimensional
//! families a central-difference score integrated against f.
inline Matrix fisher_information(const FamilySpec& fam, const Vector& theta)
{
  detail::refuse_nondifferentiable(fam, "fisher_information");
  detail::require_interior(fam, theta, 0.0, "fisher_information");
  if (fam.as<ExponentialFamily>())
    return log_partition(fam, theta).hessian;
  if (auto n = fam.as<NormalLocation>())
    return Matrix::Identity(n->dim, n->dim);
  detail::require_interior(fam, theta, detail::fd_step(theta, 0) * 2, "fisher_information");
  std::vector<double> steps;
  auto pairs = detail::fd_pairs(fam, theta, steps);
  Density f(fam, theta);
  const int p = static_cast<int>(theta.size());
  Matrix a(p, p);
  for (int j = 0; j < p; ++j)
    for (int k = j; k < p; ++k) {
      a(j, k) = a(k, j) = detail::integrate_pair(f, f, [&](double x) {
        double lf = log_pdf(f, x);
        if (lf == -inf)
          return 0.0;
        double sj = (log_pdf(pairs[j].first, x) - log_pdf(pairs[j].second, x)) / (2 * steps[j]);
        double sk = (log_pdf(pairs[k].first, x) - log_pdf(pairs[k].second, x)) / (2 * steps[k]);
        double v = sj * sk * std::exp(lf);
        return std::isfinite(v) ? v : 0.0;
      });
    }
  return a;
}

//! I_2(theta) = int grad f grad f'. Closed form for NormalLocation
//! ((4 pi)^{-d/2} / 2 times the identity); central differences in theta and
//! quadrature otherwise.
inline Matrix l2_information(const FamilySpec& fam, const Vector& theta)
{
  detail::refuse_nondifferentiable(fam, "l2_information");
  detail::require_interior(fam, theta, 0.0, "l2_information");
  if (auto n = fam.as<NormalLocation>())
    return 0.5 * std::pow(4 * std::numbers::pi, -0.5 * n->dim) * Matrix::Identity(n->dim, n->dim);
  if (fam.data_dim() != 1)
    throw UnsupportedError("l2_information: multivariate family without a closed form");
  std::vector<double> steps;
  auto pairs = detail::fd_pairs(fam, theta, steps);
  Density f(fam, theta);
  const int p = static_cast<int>(theta.size());
  Matrix a(p, p);
  for (int j = 0; j < p; ++j)
    for (int k = j; k < p; ++k)
      a(j, k) = a(k, j) = detail::integrate_pair(f, f, [&](double x) {
        double dj = (pdf(pairs[j].first, x) - pdf(pairs[j].second, x)) / (2 * steps[j]);
        double dk = (pdf(pairs[k].first, x) - pdf(pairs[k].second, x)) / (2 * steps[k]);
        double v = dj * dk;
        return std::isfinite(v) ? v : 0.0;
      });
  return a;
}

//! I_K(theta) = iint K(y - z) grad f(y) grad f(z)'. For NormalLocation with
//! a Gaussian kernel this is I_2 of N(theta, (1 + b^2) I).
inline Matrix rkhs_information(const FamilySpec& fam, const Vector& theta, const KernelSpec& k)
{
  k.validated();
  detail::refuse_nondifferentiable(fam, "rkhs_information");
  detail::require_interior(fam, theta, 0.0, "rkhs_information");
  if (auto n = fam.as<NormalLocation>(); n && k.form == KernelSpec::Form::Gaussian) {
    double s2 = 1.0 + k.bandwidth * k.bandwidth;
    return 0.5 / s2 * std::pow(4 * std::numbers::pi * s2, -0.5 * n->dim) *
           Matrix::Identity(n->dim, n->dim);
  }
  if (fam.data_dim() != 1)
    throw UnsupportedError("rkhs_information: multivariate family without a closed form");
  std::vector<double> steps;
  auto pairs = detail::fd_pairs(fam, theta, steps);
  Density f(fam, theta);
  Interval sup = effective_support(f);
  std::vector<double> pts = breakpoints(f);
  for (const auto& [dp, dm] : pairs) {
    Interval a = effective_support(dp), b = effective_support(dm);
    sup.lo = std::min({ sup.lo, a.lo, b.lo });
    sup.hi = std::max({ sup.hi, a.hi, b.hi });
  }
  const int p = static_cast<int>(theta.size());
  Matrix a(p, p);
  for (int j = 0; j < p; ++j)
    for (int l = j; l < p; ++l) {
      auto dj = [&](double x) {
        double v = (pdf(pairs[j].first, x) - pdf(pairs[j].second, x)) / (2 * steps[j]);
        return std::isfinite(v) ? v : 0.0;
      };
      auto dl = [&](double x) {
        double v = (pdf(pairs[l].first, x) - pdf(pairs[l].second, x)) / (2 * steps[l]);
        return std::isfinite(v) ? v : 0.0;
      };
      a(j, l) = a(l, j) = detail::kernel_bilinear(dj, dl, k, sup.lo, sup.hi, pts, fam.measure());
    }
  return a;
}

//! Hessian of theta' -> W2(f_theta, f_theta')^2 / 2 at theta' = theta, from
//! symmetric second differences with step h (polarization for off-diagonal
//! entries). One-dimensional data only.
inline Matrix wasserstein_information_1d(const FamilySpec& fam, const Vector& theta,
                                         double h = 2e-3, Evaluation ev = Evaluation::Auto)
{
  if (fam.data_dim() != 1)
    throw UnsupportedError("wasserstein_information_1d: multivariate data");
  detail::require_interior(fam, theta, 2 * h, "wasserstein_information_1d");
  Density f(fam, theta);
  auto q = [&](const Vector& v) {
    Density a(fam, Vector(theta + h * v)), b(fam, Vector(theta - h * v));
    double wa = w2_distance(f, a, ev), wb = w2_distance(f, b, ev);
    return (wa * wa + wb * wb) / (2 * h * h);
  };
  const int p = static_cast<int>(theta.size());
  Matrix a(p, p);
  for (int j = 0; j < p; ++j)
    a(j, j) = q(Vector::Unit(p, j));
  for (int j = 0; j < p; ++j)
    for (int k = j + 1; k < p; ++k) {
      Vector u = Vector::Unit(p, j) + Vector::Unit(p, k);
      Vector w = Vector::Unit(p, j) - Vector::Unit(p, k);
      a(j, k) = a(k, j) = 0.25 * (q(u) - q(w));
    }
  return a;
}

inline MetricTensorField fisher_field(const FamilySpec& fam)
{
  return { TensorKind::Fisher, fam.param_dim(),
           [fam](const Vector& t) { return fisher_information(fam, t); } };
}

inline MetricTensorField l2_field(const FamilySpec& fam)
{
  return { TensorKind::L2Info, fam.param_dim(),
           [fam](const Vector& t) { return l2_information(fam, t); } };
}

inline MetricTensorField rkhs_field(const FamilySpec& fam, const KernelSpec& k)
{
  return { TensorKind::RkhsInfo, fam.param_dim(),
           [fam, k](const Vector& t) { return rkhs_information(fam, t, k); }, k };
}

inline MetricTensorField wasserstein_field(const FamilySpec& fam)
{
  return { TensorKind::WassersteinInfo1D, fam.param_dim(),
           [fam](const Vector& t) { return wasserstein_information_1d(fam, t); } };
}

// ---------------------------------------------------------------------------
// Curves and lengths

//! Discretized curve t_0 < ... < t_k through parameter points.
struct ParameterCurve
{
  std::vector<Vector> points;

  static ParameterCurve straight(const Vector& from, const Vector& to, std::size_t segments)
  {
    if (segments < 1)
      throw DomainError("ParameterCurve::straight: need at least one segment");
    ParameterCurve c;
    for (std::size_t i = 0; i <= segments; ++i) {
      double t = static_cast<double>(i) / static_cast<double>(segments);
      c.points.push_back((1 - t) * from + t * to);
    }
    c.points.back() = to;
    return c;
  }

  void validate(const FamilySpec& fam) const
  {
    if (points.size() < 2)
      throw DomainError("ParameterCurve: need at least two points");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!fam.parameter_space.contains(points[i]))
        throw DomainError("ParameterCurve: point " + std::to_string(i) +
                          " lies outside the parameter space");
      if (i && points[i] == points[i - 1])
        throw DomainError("ParameterCurve: consecutive points " + std::to_string(i - 1) + " and " +
                          std::to_string(i) + " coincide");
    }
  }
};

//! Chordal sum of delta over consecutive curve points.
inline double path_length(const ParameterCurve& c, const DissimilaritySpec& spec,
                          const FamilySpec& fam)
{
  if (!spec.is_metric())
    throw UnsupportedError("path_length: " + spec.name() + " is not a metric");
  c.validate(fam);
  double s = 0.0;
  for (std::size_t i = 1; i < c.points.size(); ++i)
    s += dissimilarity(Density(fam, c.points[i - 1]), Density(fam, c.points[i]), spec);
  return s;
}

// ---------------------------------------------------------------------------
// Lattice intrinsic distance

struct LatticeOptions
{
  //! Approximate number of cells per axis across the box.
  std::size_t cells = 400;
  //! Box margin around the two endpoints, relative to their largest
  //! coordinate difference. Ignored when an explicit box is given.
  double margin = 0.25;
  std::optional<Vector> box_lo, box_hi;
};

namespace detail {

//! Offsets of the lattice stencil. 1-D: +-1. 2-D: all primitive integer
//! vectors with max-norm <= 3 (32 directions; worst-case anisotropy of a
//! flat metric about 0.5%). Higher dimensions: the 3^p - 1 unit neighbors.
inline std::vector<std::vector<int>> lattice_stencil(int p)
{
  std::vector<std::vector<int>> out;
  if (p == 1)
    return { { 1 }, { -1 } };
  if (p == 2) {
    for (int a = -3; a <= 3; ++a)
      for (int b = -3; b <= 3; ++b)
        if ((a || b) && std::gcd(std::abs(a), std::abs(b)) == 1)
          out.push_back({ a, b });
    return out;
  }
  std::vector<int> v(p, -1);
  while (true) {
    if (std::any_of(v.begin(), v.end(), [](int x) { return x != 0; }))
      out.push_back(v);
    int j = 0;
    while (j < p && v[j] == 1)
      v[j++] = -1;
    if (j == p)
      break;
    ++v[j];
  }
  return out;
}

struct LatticeAxis
{
  double origin; // coordinate of node 0
  double step;
  long count;    // nodes 0 .. count - 1
  long a_index;  // node of theta
  long b_index;  // node of theta0
};

} // namespace detail

//! Riemannian distance under `tensor` between theta and theta0, by Dijkstra
//! on a parameter lattice that contains both points as nodes. Edge weights
//! are sqrt(d' A(midpoint) d); A is evaluated lazily on the twice-refined
//! lattice, where every edge midpoint lies.
inline double intrinsic_distance(const Vector& theta, const Vector& theta0,
                                 const MetricTensorField& tensor, const FamilySpec& fam,
                                 const LatticeOptions& opt = {})
{
  const int p = static_cast<int>(theta.size());
  if (theta0.size() != p || p != tensor.param_dim || p != fam.param_dim())
    throw DomainError("intrinsic_distance: dimensions do not agree");
  if (!fam.parameter_space.contains(theta) || !fam.parameter_space.contains(theta0))
    throw DomainError("intrinsic_distance: endpoints lie outside the parameter space");
  if (theta == theta0)
    return 0.0;
  if (opt.cells < 2)
    throw DomainError("intrinsic_distance: need at least 2 cells per axis");

  const double spread = (theta - theta0).cwiseAbs().maxCoeff();
  std::vector<detail::LatticeAxis> axes(p);
  for (int j = 0; j < p; ++j) {
    double lo_pt = std::min(theta[j], theta0[j]), hi_pt = std::max(theta[j], theta0[j]);
    double lo = opt.box_lo ? (*opt.box_lo)[j] : lo_pt - opt.margin * spread;
    double hi = opt.box_hi ? (*opt.box_hi)[j] : hi_pt + opt.margin * spread;
    const Interval& bound = fam.parameter_space[j];
    if (opt.box_lo || opt.box_hi) {
      if (lo > lo_pt || hi < hi_pt)
        throw DomainError("intrinsic_distance: endpoints lie outside the lattice box");
      if (lo < bound.lo || hi > bound.hi)
        throw DomainError("intrinsic_distance: lattice box leaves the parameter space");
    } else {
      // Keep the automatic box strictly inside Theta.
      double room_lo = lo_pt - bound.lo, room_hi = bound.hi - hi_pt;
      lo = std::max(lo, lo_pt - 0.5 * room_lo);
      hi = std::min(hi, hi_pt + 0.5 * room_hi);
    }
    double extent = hi_pt - lo_pt;
    detail::LatticeAxis ax;
    if (extent > 0) {
      long k = std::max(1L, std::lround(opt.cells * extent / (hi - lo)));
      ax.step = extent / k;
      long below = static_cast<long>(std::floor((lo_pt - lo) / ax.step * (1 + 1e-12)));
      long above = static_cast<long>(std::floor((hi - hi_pt) / ax.step * (1 + 1e-12)));
      ax.origin = lo_pt - below * ax.step;
      ax.count = below + k + above + 1;
      ax.a_index = theta[j] <= theta0[j] ? below : below + k;
      ax.b_index = theta[j] <= theta0[j] ? below + k : below;
    } else {
      ax.step = (hi - lo) / opt.cells;
      long below = static_cast<long>(std::floor((lo_pt - lo) / ax.step * (1 + 1e-12)));
      long above = static_cast<long>(std::floor((hi - hi_pt) / ax.step * (1 + 1e-12)));
      ax.origin = lo_pt - below * ax.step;
      ax.count = below + above + 1;
      ax.a_index = ax.b_index = below;
    }
    axes[j] = ax;
  }

  // Node coordinates; refined coordinates are node coordinates times 2.
  std::size_t n_nodes = 1, n_refined = 1;
  for (const auto& ax : axes) {
    n_nodes *= static_cast<std::size_t>(ax.count);
    n_refined *= static_cast<std::size_t>(2 * ax.count - 1);
  }
  auto node_id = [&](const std::vector<long>& idx) {
    std::size_t id = 0;
    for (int j = p - 1; j >= 0; --j)
      id = id * axes[j].count + idx[j];
    return id;
  };
  auto refined_id = [&](const std::vector<long>& ridx) {
    std::size_t id = 0;
    for (int j = p - 1; j >= 0; --j)
      id = id * (2 * axes[j].count - 1) + ridx[j];
    return id;
  };
  std::vector<Matrix> cache(n_refined);
  std::vector<char> cached(n_refined, 0);
  auto tensor_at = [&](const std::vector<long>& ridx) -> const Matrix& {
    std::size_t id = refined_id(ridx);
    if (!cached[id]) {
      Vector t(p);
      for (int j = 0; j < p; ++j)
        t[j] = axes[j].origin + 0.5 * ridx[j] * axes[j].step;
      cache[id] = tensor(t);
      cached[id] = 1;
    }
    return cache[id];
  };

  std::vector<long> a_idx(p), b_idx(p);
  for (int j = 0; j < p; ++j) {
    a_idx[j] = axes[j].a_index;
    b_idx[j] = axes[j].b_index;
  }
  const std::size_t src = node_id(a_idx), dst = node_id(b_idx);
  const auto stencil = detail::lattice_stencil(p);

  std::vector<double> dist(n_nodes, inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({ 0.0, src });
  std::vector<long> idx(p), nb(p), mid(p);
  Vector step(p);
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u])
      continue;
    if (u == dst)
      return du;
    std::size_t rest = u;
    for (int j = 0; j < p; ++j) {
      idx[j] = static_cast<long>(rest % axes[j].count);
      rest /= axes[j].count;
    }
    for (const auto& off : stencil) {
      bool inside = true;
      for (int j = 0; j < p && inside; ++j) {
        nb[j] = idx[j] + off[j];
        inside = nb[j] >= 0 && nb[j] < axes[j].count;
      }
      if (!inside)
        continue;
      for (int j = 0; j < p; ++j) {
        mid[j] = idx[j] + nb[j]; // refined index of the midpoint
        step[j] = off[j] * axes[j].step;
      }
      double w = std::sqrt(step.dot(tensor_at(mid) * step));
      std::size_t v = node_id(nb);
      if (du + w < dist[v]) {
        dist[v] = du + w;
        pq.push({ dist[v], v });
      }
    }
  }
  return dist[dst];
}

// ---------------------------------------------------------------------------
// Ratio probe

struct ProbeOptions
{
  //! Probe directions (columns). Empty: unit vectors and e_j + e_k.
  Matrix directions;
  //! Decreasing step sizes, smallest >= 1e-4.
  std::vector<double> steps{ 1e-1, 3e-2, 1e-2, 3e-3, 1e-3 };
  //! Allowed deviation of the fitted log-log exponent from 2.
  double exponent_tolerance = 0.25;
};

struct ProbeResult
{
  Matrix tensor;                 // A-hat at the smallest step
  std::vector<Matrix> per_step;  // A-hat for each step
  double exponent = 2.0;         // slope of log delta^2 against log h (two smallest steps)
  bool exponent_mismatch = false;
  double omega = 0.0;            // relative change of A-hat between the two smallest steps
};

//! Fits delta(theta0 + h v, theta0)^2 / h^2 (symmetrized over +-h) along
//! the directions to a quadratic form v' A v. For divergences delta^2 is
//! delta_psi itself. Local behavior that is not quadratic in h is flagged,
//! not fitted.
inline ProbeResult intrinsic_ratio_probe(const DissimilaritySpec& spec, const FamilySpec& fam,
                                         const Vector& theta0, const ProbeOptions& opt = {})
{
  const int p = static_cast<int>(theta0.size());
  if (p != fam.param_dim())
    throw DomainError("intrinsic_ratio_probe: theta0 has the wrong dimension");
  if (opt.steps.size() < 2)
    throw DomainError("intrinsic_ratio_probe: need at least two step sizes");
  for (std::size_t i = 0; i < opt.steps.size(); ++i) {
    if (!(opt.steps[i] >= 1e-4))
      throw DomainError("intrinsic_ratio_probe: step sizes must be >= 1e-4");
    if (i && !(opt.steps[i] < opt.steps[i - 1]))
      throw DomainError("intrinsic_ratio_probe: step sizes must decrease");
  }
  Matrix dirs = opt.directions;
  if (dirs.size() == 0) {
    dirs = Matrix::Zero(p, p + p * (p - 1) / 2);
    int c = 0;
    for (int j = 0; j < p; ++j)
      dirs(j, c++) = 1.0;
    for (int j = 0; j < p; ++j)
      for (int k = j + 1; k < p; ++k) {
        dirs(j, c) = dirs(k, c) = 1.0;
        ++c;
      }
  }
  if (dirs.rows() != p)
    throw DomainError("intrinsic_ratio_probe: directions have the wrong dimension");
  const int m = p * (p + 1) / 2;
  // Design matrix: v' A v = sum_j A_jj v_j^2 + 2 sum_{j<k} A_jk v_j v_k.
  Matrix design(dirs.cols(), m);
  for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
    int col = 0;
    for (int j = 0; j < p; ++j)
      for (int k = j; k < p; ++k)
        design(c, col++) = (j == k ? 1.0 : 2.0) * dirs(j, c) * dirs(k, c);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < m)
    throw DomainError("intrinsic_ratio_probe: directions do not determine a symmetric matrix");

  Density base(fam, theta0);
  std::vector<Vector> ratio; // per step: q(v) for each direction
  ProbeResult res;
  for (double h : opt.steps) {
    Vector q(dirs.cols());
    for (Eigen::Index c = 0; c < dirs.cols(); ++c) {
      Vector v = dirs.col(c);
      Vector tp = theta0 + h * v, tm = theta0 - h * v;
      if (!fam.parameter_space.contains(tp) || !fam.parameter_space.contains(tm))
        throw DomainError("intrinsic_ratio_probe: probe point leaves the parameter space");
      double dp = squared_dissimilarity(base, Density(fam, tp), spec);
      double dm = squared_dissimilarity(base, Density(fam, tm), spec);
      q[c] = (dp + dm) / (2 * h * h);
    }
    Vector coef = qr.solve(q);
    Matrix a(p, p);
    int col = 0;
    for (int j = 0; j < p; ++j)
      for (int k = j; k < p; ++k)
        a(j, k) = a(k, j) = coef[col++];
    res.per_step.push_back(a);
    ratio.push_back(q);
  }
  const std::size_t last = opt.steps.size() - 1;
  res.tensor = res.per_step[last];
  // Exponent from the direction-summed delta^2 = q h^2 at the two smallest steps.
  double s1 = ratio[last - 1].sum() * opt.steps[last - 1] * opt.steps[last - 1];
  double s2 = ratio[last].sum() * opt.steps[last] * opt.steps[last];
  res.exponent = std::log(s1 / s2) / std::log(opt.steps[last - 1] / opt.steps[last]);
  res.exponent_mismatch = !(std::abs(res.exponent - 2.0) <= opt.exponent_tolerance);
  double norm = res.tensor.norm();
  res.omega = norm > 0 ? (res.tensor - res.per_step[last - 1]).norm() / norm : inf;
  return res;
}

} // namespace fmds
