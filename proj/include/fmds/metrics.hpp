#pragma once

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fmds {

// ---------------------------------------------------------------------------
// Kernels

//! Translation-invariant smoothing kernel kappa with bandwidth b, and the
//! RKHS kernel it induces, K = kappa * kappa.
//!  - Gaussian: kappa = N(0, b^2) density, K = N(0, 2 b^2) density.
//!  - TriweightConvolution: kappa(u) = 35/(32 b) (1 - (u/b)^2)^3 on |u| <= b,
//!    K its self-convolution (supported on |u| <= 2b).
struct KernelSpec
{
  enum class Form
  {
    Gaussian,
    TriweightConvolution
  };

  Form form = Form::Gaussian;
  double bandwidth = 1.0;

  static KernelSpec gaussian(double b) { return KernelSpec{ Form::Gaussian, b }.validated(); }
  static KernelSpec triweight(double b)
  {
    return KernelSpec{ Form::TriweightConvolution, b }.validated();
  }

  KernelSpec validated() const
  {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw SpecError("kernel bandwidth must be positive and finite");
    return *this;
  }

  std::string name() const
  {
    return form == Form::Gaussian ? "gaussian" : "triweight_convolution";
  }

  double smoothing(double u) const
  {
    const double b = bandwidth;
    if (form == Form::Gaussian) {
      double z = u / b;
      return std::exp(-0.5 * z * z) / (b * std::sqrt(2 * std::numbers::pi));
    }
    double z = u / b;
    if (std::abs(z) >= 1.0)
      return 0.0;
    double w = 1.0 - z * z;
    return 35.0 / (32.0 * b) * w * w * w;
  }

  double rkhs(double u) const
  {
    const double b = bandwidth;
    if (form == Form::Gaussian) {
      double s2 = 2.0 * b * b;
      return std::exp(-0.5 * u * u / s2) / std::sqrt(2 * std::numbers::pi * s2);
    }
    u = std::abs(u);
    if (u >= 2.0 * b)
      return 0.0;
    // The integrand is a degree-12 polynomial on the overlap, so a 7-point
    // Gauss-Legendre rule is exact.
    double lo = u - b, hi = b;
    return boost::math::quadrature::gauss<double, 7>::integrate(
      [&](double x) { return smoothing(x) * smoothing(x - u); }, lo, hi);
  }

  //! Half-width beyond which kappa is negligible (exactly zero for triweight).
  double smoothing_radius() const
  {
    return form == Form::Gaussian ? 10.0 * bandwidth : bandwidth;
  }
  double rkhs_radius() const
  {
    return form == Form::Gaussian ? 10.0 * std::numbers::sqrt2 * bandwidth : 2.0 * bandwidth;
  }
};

// ---------------------------------------------------------------------------
// f-divergence generators

//! Convex psi on (0, inf) with psi(1) = 0. The symmetrized integrand
//! f psi(g/f) + g psi(f/g) equals max(f,g) * phi(min/max) with
//! phi(r) = psi(r) + r psi(1/r) on [0, 1]; phi(0) = psi(0+) + lim psi(t)/t.
struct Psi
{
  std::string name;
  std::function<double(double)> fn;
  std::function<double(double)> phi_fn; // symmetrized form on [0, 1]
  double at_zero = 0.0;
  double slope_at_infinity = 0.0;
  double second_derivative_at_one = std::nan("");

  double operator()(double t) const { return fn(t); }

  double phi(double r) const
  {
    if (r <= 0.0)
      return at_zero + slope_at_infinity;
    if (phi_fn)
      return phi_fn(r);
    return fn(r) + r * fn(1.0 / r);
  }

  static Psi hellinger()
  {
    Psi p;
    p.name = "hellinger";
    p.fn = [](double t) {
      double s = std::sqrt(t) - 1.0;
      return 0.5 * s * s;
    };
    p.phi_fn = [](double r) {
      double s = 1.0 - std::sqrt(r);
      return s * s;
    };
    p.at_zero = 0.5;
    p.slope_at_infinity = 0.5;
    p.second_derivative_at_one = 0.25;
    return p;
  }

  static Psi kl()
  {
    Psi p;
    p.name = "kl";
    p.fn = [](double t) { return -std::log(t); };
    p.phi_fn = [](double r) { return -(1.0 - r) * std::log(r); };
    p.at_zero = inf;
    p.slope_at_infinity = 0.0;
    p.second_derivative_at_one = 1.0;
    return p;
  }

  static Psi chi_square()
  {
    Psi p;
    p.name = "chi_square";
    p.fn = [](double t) { return (t - 1.0) * (t - 1.0); };
    p.phi_fn = [](double r) { return (1.0 - r) * (1.0 - r) * (1.0 + r) / r; };
    p.at_zero = 1.0;
    p.slope_at_infinity = inf;
    p.second_derivative_at_one = 2.0;
    return p;
  }

  static Psi total_variation()
  {
    Psi p;
    p.name = "total_variation";
    p.fn = [](double t) { return 0.5 * std::abs(t - 1.0); };
    p.phi_fn = [](double r) { return 1.0 - r; };
    p.at_zero = 0.5;
    p.slope_at_infinity = 0.5;
    return p;
  }

  //! User-supplied generator; checked for psi(1) = 0 and convexity.
  static Psi custom(std::string name,
                    std::function<double(double)> fn,
                    double at_zero,
                    double slope_at_infinity)
  {
    Psi p;
    p.name = std::move(name);
    p.fn = std::move(fn);
    p.at_zero = at_zero;
    p.slope_at_infinity = slope_at_infinity;
    p.validate();
    double h = 1e-4;
    p.second_derivative_at_one = (p.fn(1 + h) - 2 * p.fn(1) + p.fn(1 - h)) / (h * h);
    return p;
  }

  //! psi(1) = 0 and nonnegative second divided differences on a log grid
  //! over [1e-3, 1e3]. Throws SpecError otherwise.
  void validate() const
  {
    if (!fn)
      throw SpecError("psi '" + name + "' has no function");
    if (std::abs(fn(1.0)) > 1e-12)
      throw SpecError("psi '" + name + "' must satisfy psi(1) = 0");
    const int n = 601;
    std::vector<double> t(n), v(n);
    for (int i = 0; i < n; ++i) {
      t[i] = std::pow(10.0, -3.0 + 6.0 * i / (n - 1));
      v[i] = fn(t[i]);
      if (std::isnan(v[i]))
        throw SpecError("psi '" + name + "' is NaN on (0, inf)");
    }
    for (int i = 1; i + 1 < n; ++i) {
      double s1 = (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
      double s2 = (v[i + 1] - v[i]) / (t[i + 1] - t[i]);
      double scale = 1e-9 * (1.0 + std::abs(s1) + std::abs(s2));
      if (s2 < s1 - scale)
        throw SpecError("psi '" + name + "' is not convex near t = " + std::to_string(t[i]));
    }
  }
};

// ---------------------------------------------------------------------------
// Dissimilarity descriptors

enum class DissimilarityKind
{
  L2,
  Rkhs,
  Hellinger,
  SymKL,
  ChiSq,
  FDiv,
  Wasserstein2
};

enum class Evaluation
{
  ClosedForm,
  Quadrature,
  Auto
};

struct DissimilaritySpec
{
  DissimilarityKind kind = DissimilarityKind::L2;
  Evaluation evaluation = Evaluation::Auto;
  KernelSpec kernel{};     // Rkhs only
  std::optional<Psi> psi;  // FDiv only

  static DissimilaritySpec l2(Evaluation e = Evaluation::Auto) { return { DissimilarityKind::L2, e }; }
  static DissimilaritySpec rkhs(KernelSpec k, Evaluation e = Evaluation::Auto)
  {
    return { DissimilarityKind::Rkhs, e, k.validated() };
  }
  static DissimilaritySpec hellinger(Evaluation e = Evaluation::Auto)
  {
    return { DissimilarityKind::Hellinger, e };
  }
  static DissimilaritySpec symkl(Evaluation e = Evaluation::Auto)
  {
    return { DissimilarityKind::SymKL, e };
  }
  static DissimilaritySpec chisq(Evaluation e = Evaluation::Auto)
  {
    return { DissimilarityKind::ChiSq, e };
  }
  static DissimilaritySpec fdiv(Psi p)
  {
    p.validate();
    return { DissimilarityKind::FDiv, Evaluation::Quadrature, {}, std::move(p) };
  }
  static DissimilaritySpec w2(Evaluation e = Evaluation::Auto)
  {
    return { DissimilarityKind::Wasserstein2, e };
  }

  //! True metrics; the others are divergences stored as sqrt(delta_psi).
  bool is_metric() const
  {
    return kind == DissimilarityKind::L2 || kind == DissimilarityKind::Rkhs ||
           kind == DissimilarityKind::Hellinger || kind == DissimilarityKind::Wasserstein2;
  }

  std::string name() const
  {
    switch (kind) {
      case DissimilarityKind::L2:
        return "L2";
      case DissimilarityKind::Rkhs:
        return "RKHS";
      case DissimilarityKind::Hellinger:
        return "Hellinger";
      case DissimilarityKind::SymKL:
        return "SymKL";
      case DissimilarityKind::ChiSq:
        return "ChiSq";
      case DissimilarityKind::FDiv:
        return "FDiv";
      case DissimilarityKind::Wasserstein2:
        return "Wasserstein2";
    }
    return "?";
  }

  Psi generator() const
  {
    switch (kind) {
      case DissimilarityKind::Hellinger:
        return Psi::hellinger();
      case DissimilarityKind::SymKL:
        return Psi::kl();
      case DissimilarityKind::ChiSq:
        return Psi::chi_square();
      case DissimilarityKind::FDiv:
        if (!psi)
          throw SpecError("FDiv dissimilarity without psi");
        return *psi;
      default:
        throw SpecError(name() + " is not an f-divergence");
    }
  }
};

// ---------------------------------------------------------------------------
// Closed forms

//! Proportionality constants that the model-specific L2 formulas leave
//! implicit, pinned against quadrature of the defining integrals:
//!  - normal location, dim d:   ||f_t - f_s||^2 = 2 (4 pi)^{-d/2} (1 - exp(-|t-s|^2/4))
//!  - Unif(t, t+1):             ||f_t - f_s||^2 = 2 min(|t - s|, 1)
//!  - Gamma scale, shape k:     ||f_t - f_s||^2 = C_k [1/t + 1/s - 4^{k+1} (ts)^k (t+s)^{-(2k+1)}],
//!                              C_k = Gamma(2k+1) / (2^{2k+1} Gamma(k+1)^2).
//!    The (t+s) factor carries a negative exponent; see tests/unit/test_metrics.cpp.
namespace constants {

inline double l2_normal(int dim)
{
  return 2.0 * std::pow(4.0 * std::numbers::pi, -0.5 * dim);
}

inline constexpr double l2_uniform = 2.0;

inline double l2_gamma_scale(double k)
{
  return std::exp(std::lgamma(2 * k + 1) - (2 * k + 1) * std::numbers::ln2 -
                  2 * std::lgamma(k + 1));
}

} // namespace constants

namespace closed_form {

namespace detail {

inline bool same(const Density& f, const Density& g) { return f.family.same_family(g.family); }

//! Gamma-scale bracket 1/t + 1/s - 4^{k+1}(ts)^k/(t+s)^{2k+1} in a form that
//! does not cancel catastrophically when s is close to t.
inline double gamma_scale_bracket(double k, double t, double s)
{
  double ratio = s / t;
  double lr = std::log(ratio);
  double sh = std::sinh(0.25 * lr);
  double log_c = std::log1p(2.0 * sh * sh); // log cosh(lr / 2)
  double c_pow = std::exp(-2.0 * k * log_c);
  return 4.0 * c_pow * std::expm1((2.0 * k + 2.0) * log_c) / (t * (1.0 + ratio));
}

} // namespace detail

//! Squared L2 distance when a closed form is known for the pair.
inline std::optional<double> l2_squared(const Density& f, const Density& g)
{
  if (!detail::same(f, g))
    return std::nullopt;
  if (auto n = f.family.as<NormalLocation>()) {
    double q = (f.theta - g.theta).squaredNorm();
    return constants::l2_normal(n->dim) * -std::expm1(-0.25 * q);
  }
  if (f.family.as<UniformLocation1D>())
    return constants::l2_uniform * std::min(std::abs(f.theta[0] - g.theta[0]), 1.0);
  if (auto gs = f.family.as<GammaScale>()) {
    double k = gs->shape;
    if (!(k > -0.5))
      throw DomainError("GammaScale densities are square integrable only for k > -1/2");
    return constants::l2_gamma_scale(k) *
           detail::gamma_scale_bracket(k, f.theta[0], g.theta[0]);
  }
  return std::nullopt;
}

//! Squared Hellinger distance int (sqrt f - sqrt g)^2 (bounded by 2).
inline std::optional<double> hellinger_squared(const Density& f, const Density& g)
{
  if (!detail::same(f, g))
    return std::nullopt;
  if (f.family.as<NormalLocation>())
    return -2.0 * std::expm1(-0.125 * (f.theta - g.theta).squaredNorm());
  if (f.family.as<UniformLocation1D>())
    return 2.0 * std::min(std::abs(f.theta[0] - g.theta[0]), 1.0);
  if (auto gs = f.family.as<GammaScale>()) {
    double t = f.theta[0], s = g.theta[0];
    double log_bc = (gs->shape + 1) * (std::log(2.0) + 0.5 * std::log(t * s) - std::log(t + s));
    return -2.0 * std::expm1(log_bc);
  }
  if (auto e = f.family.as<ExponentialFamily>()) {
    Vector mid = 0.5 * (f.theta + g.theta);
    double r = e->log_partition(mid) -
               0.5 * (e->log_partition(f.theta) + e->log_partition(g.theta));
    return -2.0 * std::expm1(r);
  }
  if (auto l = f.family.as<LocationScale1D>(); l && l->base == BaseShape::Normal) {
    double s1 = f.theta[1], s2 = g.theta[1], dl = f.theta[0] - g.theta[0];
    double v = s1 * s1 + s2 * s2;
    double log_bc = 0.5 * std::log(2 * s1 * s2 / v) - dl * dl / (4 * v);
    return -2.0 * std::expm1(log_bc);
  }
  return std::nullopt;
}

//! Symmetrized KL divergence KL(f|g) + KL(g|f).
inline std::optional<double> symkl(const Density& f, const Density& g)
{
  if (!detail::same(f, g))
    return std::nullopt;
  if (f.family.as<NormalLocation>())
    return (f.theta - g.theta).squaredNorm();
  if (f.family.as<UniformLocation1D>())
    return f.theta[0] == g.theta[0] ? 0.0 : inf;
  if (auto gs = f.family.as<GammaScale>()) {
    double r = f.theta[0] / g.theta[0];
    return (gs->shape + 1) * (r + 1.0 / r - 2.0);
  }
  if (auto e = f.family.as<ExponentialFamily>())
    return (f.theta - g.theta).dot(e->gradient(f.theta) - e->gradient(g.theta));
  return std::nullopt;
}

//! Squared W2 distance: location-scale families via the affine transport
//! map, power warps of a uniform base via the exact polynomial integral.
inline std::optional<double> w2_squared(const Density& f, const Density& g)
{
  if (!detail::same(f, g))
    return std::nullopt;
  if (auto n = f.family.as<NormalLocation>(); n && n->dim > 1)
    return (f.theta - g.theta).squaredNorm();
  if (auto af = affine_view(f)) {
    auto ag = affine_view(g);
    double dl = af->location - ag->location;
    double ds = af->scale - ag->scale;
    double shift = dl + ds * af->base_mean;
    return shift * shift + ds * ds * af->base_variance;
  }
  if (auto t = f.family.as<TimeWarp1D>();
      t && t->warp == WarpFamily::Power && t->base == WarpBase::Uniform) {
    double a = f.theta[0], b = g.theta[0];
    return 2.0 * (a - b) * (a - b) / ((2 * a + 1) * (2 * b + 1) * (a + b + 1));
  }
  return std::nullopt;
}

//! Squared RKHS distance for a Gaussian kernel on the 1-D normal location
//! family: the L2 distance between N(t, 1 + b^2) and N(s, 1 + b^2).
inline std::optional<double> rkhs_squared(const Density& f, const Density& g, const KernelSpec& k)
{
  if (!detail::same(f, g) || k.form != KernelSpec::Form::Gaussian)
    return std::nullopt;
  auto n = f.family.as<NormalLocation>();
  if (!n || n->dim != 1)
    return std::nullopt;
  double s2 = 1.0 + k.bandwidth * k.bandwidth;
  double d = f.theta[0] - g.theta[0];
  return -std::expm1(-d * d / (4.0 * s2)) / std::sqrt(std::numbers::pi * s2);
}

} // namespace closed_form

// ---------------------------------------------------------------------------
// Quadrature routes

namespace detail {

inline const quad::Options& metric_quad_options()
{
  static const quad::Options opt{ 1e-10, 1e-9, 4000 };
  return opt;
}

inline void require_common_measure(const Density& f, const Density& g)
{
  if (!f.is_1d() || !g.is_1d())
    throw UnsupportedError("quadrature routes are one-dimensional; " + f.family.kind_name() +
                           " has no closed form here");
  if (f.family.measure() != g.family.measure())
    throw UnsupportedError("densities are defined on different reference measures");
}

//! Integrates h(x) against the common reference measure over the union of
//! the truncated supports, split at both densities' breakpoints.
template <class H>
double integrate_pair(const Density& f, const Density& g, H&& h,
                      const quad::Options& opt = metric_quad_options())
{
  require_common_measure(f, g);
  Interval sf = effective_support(f), sg = effective_support(g);
  double lo = std::min(sf.lo, sg.lo), hi = std::max(sf.hi, sg.hi);
  if (f.family.measure() == Measure::Counting)
    return quad::sum_integers(h, static_cast<long>(std::ceil(lo)),
                              static_cast<long>(std::floor(hi)));
  std::vector<double> pts = breakpoints(f);
  auto pg = breakpoints(g);
  pts.insert(pts.end(), pg.begin(), pg.end());
  pts.push_back(sf.lo);
  pts.push_back(sf.hi);
  pts.push_back(sg.lo);
  pts.push_back(sg.hi);
  auto breaks = quad::make_breaks(std::move(pts), lo, hi);
  return quad::integrate_pieces(h, breaks, opt).value;
}

} // namespace detail

//! L2 distance ||f - g||.
inline double l2_distance(const Density& f, const Density& g, Evaluation ev = Evaluation::Auto)
{
  if (ev != Evaluation::Quadrature)
    if (auto v = closed_form::l2_squared(f, g))
      return std::sqrt(*v);
  if (ev == Evaluation::ClosedForm)
    throw DispatchError("no L2 closed form for " + f.family.kind_name());
  if (auto gs = f.family.as<GammaScale>(); gs && !(gs->shape > -0.5))
    throw DomainError("GammaScale densities are square integrable only for k > -1/2");
  double v = detail::integrate_pair(f, g, [&](double x) {
    double d = pdf(f, x) - pdf(g, x);
    return d * d;
  });
  return std::sqrt(std::max(v, 0.0));
}

//! Closed-form squared L2 distance; DispatchError when none is registered.
inline double l2_closed_form(const Density& f, const Density& g)
{
  if (auto v = closed_form::l2_squared(f, g))
    return *v;
  throw DispatchError("no L2 closed form for " + f.family.kind_name());
}

//! L2 inner product <f, g>.
inline double l2_inner_product(const Density& f, const Density& g, Evaluation ev = Evaluation::Auto)
{
  if (ev != Evaluation::Quadrature && f.family.same_family(g.family)) {
    if (auto n = f.family.as<NormalLocation>()) {
      double q = (f.theta - g.theta).squaredNorm();
      return std::pow(4.0 * std::numbers::pi, -0.5 * n->dim) * std::exp(-0.25 * q);
    }
  }
  if (ev == Evaluation::ClosedForm)
    throw DispatchError("no closed-form inner product for " + f.family.kind_name());
  return detail::integrate_pair(f, g, [&](double x) { return pdf(f, x) * pdf(g, x); });
}

namespace detail {

//! iint K(y - z) u(y) v(z) over [lo, hi]^2 against the reference measure.
//! The inner integral is restricted to the kernel's effective radius and
//! split at `pts` (kinks of u, v) and at the kernel's own kinks.
template <class U, class V>
double kernel_bilinear(U&& u, V&& v, const KernelSpec& k, double lo, double hi,
                       std::vector<double> pts, Measure measure)
{
  if (measure == Measure::Counting) {
    long a = static_cast<long>(std::ceil(lo)), b = static_cast<long>(std::floor(hi));
    return quad::sum_integers(
      [&](double y) {
        double uy = u(y);
        if (uy == 0.0)
          return 0.0;
        return uy * quad::sum_integers([&](double z) { return k.rkhs(y - z) * v(z); }, a, b);
      },
      a, b);
  }
  auto breaks = quad::make_breaks(std::move(pts), lo, hi);
  const double radius = k.rkhs_radius();
  const quad::Options inner_opt{ 1e-12, 1e-10, 4000, quad::Rule::TanhSinh };
  quad::Options outer_opt = metric_quad_options();
  outer_opt.rule = quad::Rule::TanhSinh;
  auto inner = [&](double y) {
    // K(y - z) vanishes (or is below 1e-22 of its peak) for |y - z| > radius.
    std::vector<double> ib;
    for (double b : breaks)
      if (b > y - radius && b < y + radius)
        ib.push_back(b);
    ib.push_back(y);
    if (k.form == KernelSpec::Form::TriweightConvolution) {
      ib.push_back(y - k.bandwidth);
      ib.push_back(y + k.bandwidth);
    }
    auto ibr = quad::make_breaks(std::move(ib), std::max(lo, y - radius), std::min(hi, y + radius));
    return quad::integrate_pieces([&](double z) { return k.rkhs(y - z) * v(z); }, ibr, inner_opt)
      .value;
  };
  return quad::integrate_pieces(
           [&](double y) {
             double uy = u(y);
             return uy == 0.0 ? 0.0 : uy * inner(y);
           },
           breaks, outer_opt)
    .value;
}

} // namespace detail

//! RKHS distance sqrt( iint K(y - z) (f - g)(y) (f - g)(z) dy dz ) with
//! K = kappa * kappa. Equals ||kappa * f - kappa * g||.
inline double rkhs_distance(const Density& f, const Density& g, const KernelSpec& k,
                            Evaluation ev = Evaluation::Auto)
{
  k.validated();
  if (ev != Evaluation::Quadrature)
    if (auto v = closed_form::rkhs_squared(f, g, k))
      return std::sqrt(*v);
  if (ev == Evaluation::ClosedForm)
    throw DispatchError("no RKHS closed form for " + f.family.kind_name());
  detail::require_common_measure(f, g);
  Interval sf = effective_support(f), sg = effective_support(g);
  std::vector<double> pts = breakpoints(f);
  auto pg = breakpoints(g);
  pts.insert(pts.end(), pg.begin(), pg.end());
  auto diff = [&](double x) { return pdf(f, x) - pdf(g, x); };
  double v = detail::kernel_bilinear(diff, diff, k, std::min(sf.lo, sg.lo), std::max(sf.hi, sg.hi),
                                     std::move(pts), f.family.measure());
  return std::sqrt(std::max(v, 0.0));
}

//! Symmetrized f-divergence int [f psi(g/f) + g psi(f/g)] by quadrature.
//! Returns +inf when one density vanishes on a set of positive measure where
//! the other does not and psi makes that contribution unbounded.
inline double f_divergence(const Density& f, const Density& g, const Psi& psi)
{
  const double phi0 = psi.phi(0.0);
  bool infinite = false;
  double v = detail::integrate_pair(f, g, [&](double x) {
    double lf = log_pdf(f, x), lg = log_pdf(g, x);
    if (lf == -inf && lg == -inf)
      return 0.0;
    double lm = std::max(lf, lg);
    double r = std::exp(std::min(lf, lg) - lm);
    if (r == 0.0 && !std::isfinite(phi0)) {
      if (std::min(lf, lg) == -inf) {
        infinite = true;
        return 0.0;
      }
    }
    double val = std::exp(lm) * psi.phi(r);
    return std::isfinite(val) ? val : 0.0;
  });
  if (infinite)
    return inf;
  return std::max(v, 0.0);
}

//! Squared Hellinger distance on an exponential family from Lambda alone.
inline double hellinger_expfam(const FamilySpec& fam, const Vector& theta, const Vector& theta0)
{
  auto e = fam.as<ExponentialFamily>();
  if (!e)
    throw UnsupportedError("hellinger_expfam: not an exponential family");
  Vector mid = 0.5 * (theta + theta0);
  if (!fam.parameter_space.contains(theta) || !fam.parameter_space.contains(theta0) ||
      !fam.parameter_space.contains(mid))
    throw DomainError("hellinger_expfam: parameters or their midpoint lie outside Theta");
  double r = e->log_partition(mid) - 0.5 * (e->log_partition(theta) + e->log_partition(theta0));
  return -2.0 * std::expm1(r);
}

//! Symmetrized KL on an exponential family: (t - s)'(grad Lambda(t) - grad Lambda(s)).
inline double symkl_expfam(const FamilySpec& fam, const Vector& theta, const Vector& theta0)
{
  auto e = fam.as<ExponentialFamily>();
  if (!e)
    throw UnsupportedError("symkl_expfam: not an exponential family");
  if (!fam.parameter_space.contains(theta) || !fam.parameter_space.contains(theta0))
    throw DomainError("symkl_expfam: parameters lie outside Theta");
  return (theta - theta0).dot(e->gradient(theta) - e->gradient(theta0));
}

inline double hellinger_distance(const Density& f, const Density& g, Evaluation ev = Evaluation::Auto)
{
  if (ev != Evaluation::Quadrature)
    if (auto v = closed_form::hellinger_squared(f, g))
      return std::sqrt(std::max(*v, 0.0));
  if (ev == Evaluation::ClosedForm)
    throw DispatchError("no Hellinger closed form for " + f.family.kind_name());
  return std::sqrt(f_divergence(f, g, Psi::hellinger()));
}

namespace detail {

//! Squared W2 between two one-dimensional laws from their quantile
//! functions. Each half of (0, 1) is mapped to s in [0, 690] through
//! u = e^{-s}/2 (resp. 1 - u = e^{-s}/2), which flattens the quantile
//! blow-up at the endpoints; the tail below u = 1e-300 is dropped.
inline double w2_squared_quantile(const Density& f, const Density& g)
{
  const std::vector<double> breaks{ 0.0, 0.5, 2.0, 6.0, 16.0, 40.0, 100.0, 690.0 };
  auto lower = [&](double s) {
    double u = 0.5 * std::exp(-s);
    if (u <= 0.0)
      return 0.0;
    double d = quantile_1d(f, u) - quantile_1d(g, u);
    return d * d * u;
  };
  auto upper = [&](double s) {
    double v = 0.5 * std::exp(-s);
    if (v <= 0.0)
      return 0.0;
    double d = quantile_complement_1d(f, v) - quantile_complement_1d(g, v);
    return d * d * v;
  };
  const auto& opt = metric_quad_options();
  return quad::integrate_pieces(lower, breaks, opt).value +
         quad::integrate_pieces(upper, breaks, opt).value;
}

//! Exact squared W2 between two counting-measure laws: both quantile
//! functions are step functions, constant between merged cdf levels.
inline double w2_squared_discrete(const Density& f, const Density& g)
{
  Interval sf = effective_support(f), sg = effective_support(g);
  long lo = static_cast<long>(std::ceil(std::min(sf.lo, sg.lo)));
  long hi = static_cast<long>(std::floor(std::max(sf.hi, sg.hi)));
  std::vector<double> xs, pf, pg;
  for (long k = lo; k <= hi; ++k) {
    xs.push_back(static_cast<double>(k));
    pf.push_back(pdf(f, static_cast<double>(k)));
    pg.push_back(pdf(g, static_cast<double>(k)));
  }
  std::size_t i = 0, j = 0;
  double rf = pf.empty() ? 0.0 : pf[0], rg = pg.empty() ? 0.0 : pg[0];
  double total = 0.0;
  while (i < xs.size() && j < xs.size()) {
    double m = std::min(rf, rg);
    double d = xs[i] - xs[j];
    total += m * d * d;
    rf -= m;
    rg -= m;
    if (rf <= 0.0 && ++i < xs.size())
      rf = pf[i];
    if (rg <= 0.0 && ++j < xs.size())
      rg = pg[j];
  }
  return total;
}

} // namespace detail

//! W2 distance. Location-scale pairs and uniform power warps use closed
//! forms; other one-dimensional pairs integrate squared quantile
//! differences. General multivariate transport is not provided.
inline double w2_distance(const Density& f, const Density& g, Evaluation ev = Evaluation::Auto)
{
  if (ev != Evaluation::Quadrature)
    if (auto v = closed_form::w2_squared(f, g))
      return std::sqrt(std::max(*v, 0.0));
  if (ev == Evaluation::ClosedForm)
    throw DispatchError("no W2 closed form for " + f.family.kind_name());
  if (!f.is_1d() || !g.is_1d())
    throw UnsupportedError("W2 between multivariate densities requires a common "
                           "location-scale family");
  if (f.family.measure() == Measure::Counting && g.family.measure() == Measure::Counting)
    return std::sqrt(detail::w2_squared_discrete(f, g));
  return std::sqrt(std::max(detail::w2_squared_quantile(f, g), 0.0));
}

//! Squared dissimilarity: delta^2 for metrics, delta_psi itself for
//! f-divergences. This is the quantity classical scaling consumes.
inline double squared_dissimilarity(const Density& f, const Density& g, const DissimilaritySpec& s)
{
  const Evaluation ev = s.evaluation;
  switch (s.kind) {
    case DissimilarityKind::L2: {
      double d = l2_distance(f, g, ev);
      return d * d;
    }
    case DissimilarityKind::Rkhs: {
      double d = rkhs_distance(f, g, s.kernel, ev);
      return d * d;
    }
    case DissimilarityKind::Hellinger:
      if (ev != Evaluation::Quadrature)
        if (auto v = closed_form::hellinger_squared(f, g))
          return std::max(*v, 0.0);
      if (ev == Evaluation::ClosedForm)
        throw DispatchError("no Hellinger closed form for " + f.family.kind_name());
      return f_divergence(f, g, Psi::hellinger());
    case DissimilarityKind::SymKL:
      if (ev != Evaluation::Quadrature)
        if (auto v = closed_form::symkl(f, g))
          return std::max(*v, 0.0);
      if (ev == Evaluation::ClosedForm)
        throw DispatchError("no SymKL closed form for " + f.family.kind_name());
      return f_divergence(f, g, Psi::kl());
    case DissimilarityKind::ChiSq:
      if (ev == Evaluation::ClosedForm)
        throw DispatchError("no ChiSq closed form");
      return f_divergence(f, g, Psi::chi_square());
    case DissimilarityKind::FDiv:
      if (ev == Evaluation::ClosedForm)
        throw DispatchError("no closed form for a generic f-divergence");
      return f_divergence(f, g, s.generator());
    case DissimilarityKind::Wasserstein2: {
      double d = w2_distance(f, g, ev);
      return d * d;
    }
  }
  return 0.0;
}

//! Matrix entry delta(f, g): the metric itself, or sqrt(delta_psi) for
//! divergences (+inf allowed).
inline double dissimilarity(const Density& f, const Density& g, const DissimilaritySpec& s)
{
  return std::sqrt(squared_dissimilarity(f, g, s));
}

enum class TriangleScan
{
  Auto, // scan when n <= 200
  Always,
  Never
};

namespace detail {

//! Fills a symmetric matrix from a pair evaluator, evaluating the upper
//! triangle concurrently. Errors carry the (i, j) labels.
template <class PairFn>
DissimilarityMatrix assemble(std::vector<std::string> labels, PairFn&& pair, TriangleScan scan)
{
  const std::size_t n = labels.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      pairs.emplace_back(i, j);
  std::vector<double> vals(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    auto [i, j] = pairs[p];
    try {
      vals[p] = pair(i, j);
    } catch (const Error& e) {
      throw Error("pair (" + labels[i] + ", " + labels[j] + "): " + e.what());
    }
  });
  DissimilarityMatrix m;
  m.values = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto [i, j] = pairs[p];
    m.values(i, j) = m.values(j, i) = vals[p];
  }
  m.labels = std::move(labels);
  if (scan == TriangleScan::Always || (scan == TriangleScan::Auto && n <= 200))
    m.metric_flag = triangle_scan(m.values);
  return m;
}

inline std::vector<std::string> default_labels(std::size_t n)
{
  std::vector<std::string> l(n);
  for (std::size_t i = 0; i < n; ++i)
    l[i] = "q" + std::to_string(i);
  return l;
}

} // namespace detail

//! delta_ij for every pair of densities.
inline DissimilarityMatrix pairwise_matrix(const std::vector<Density>& items,
                                           const DissimilaritySpec& spec,
                                           std::vector<std::string> labels = {},
                                           TriangleScan scan = TriangleScan::Auto)
{
  if (labels.empty())
    labels = detail::default_labels(items.size());
  if (labels.size() != items.size())
    throw Error("pairwise_matrix: label count does not match item count");
  for (std::size_t i = 1; i < items.size(); ++i)
    if (items[i].family.kind.index() != items[0].family.kind.index())
      throw UnsupportedError("pairwise_matrix: items must come from one kind of family");
  return detail::assemble(
    std::move(labels), [&](std::size_t i, std::size_t j) { return dissimilarity(items[i], items[j], spec); },
    scan);
}

} // namespace fmds
