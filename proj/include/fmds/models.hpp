#pragma once

#include "error.hpp"
#include "rng.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fmds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double inf = std::numeric_limits<double>::infinity();

enum class Measure
{
  Lebesgue,
  Counting
};

struct Interval
{
  double lo = -inf;
  double hi = inf;

  bool contains(double x) const { return x >= lo && x <= hi; }
  bool interior(double x) const { return x > lo && x < hi; }
};

//! Closed box of admissible parameters, one interval per coordinate.
class ParameterBox
{
public:
  ParameterBox() = default;

  explicit ParameterBox(std::vector<Interval> bounds)
    : bounds_(std::move(bounds))
  {
    if (bounds_.empty())
      throw ModelError("parameter space must have at least one coordinate");
    for (const auto& b : bounds_)
      if (!(b.lo <= b.hi))
        throw ModelError("parameter space is empty (lo > hi)");
  }

  static ParameterBox unbounded(std::size_t p)
  {
    return ParameterBox(std::vector<Interval>(p));
  }

  std::size_t dim() const { return bounds_.size(); }
  const Interval& operator[](std::size_t i) const { return bounds_[i]; }
  const std::vector<Interval>& bounds() const { return bounds_; }

  bool contains(const Vector& theta) const
  {
    if (static_cast<std::size_t>(theta.size()) != bounds_.size())
      return false;
    for (std::size_t i = 0; i < bounds_.size(); ++i)
      if (!bounds_[i].contains(theta[i]))
        return false;
    return true;
  }

  bool interior(const Vector& theta) const
  {
    if (!contains(theta))
      return false;
    for (std::size_t i = 0; i < bounds_.size(); ++i)
      if (!bounds_[i].interior(theta[i]))
        return false;
    return true;
  }

private:
  std::vector<Interval> bounds_;
};

// ---------------------------------------------------------------------------
// Warps of [0, 1]

//! Increasing map of [0, 1] onto itself: a power x^a or a monotone cubic
//! Hermite spline through (knots, values) with Fritsch-Butland slopes.
class WarpFunction
{
public:
  enum class Kind
  {
    Power,
    Spline
  };

  static WarpFunction power(double a)
  {
    if (!(a > 0.0) || !std::isfinite(a))
      throw DomainError("power warp exponent must be positive");
    WarpFunction w;
    w.kind_ = Kind::Power;
    w.exponent_ = a;
    return w;
  }

  static WarpFunction spline(std::vector<double> knots, std::vector<double> values)
  {
    if (knots.size() != values.size() || knots.size() < 2)
      throw DomainError("spline warp needs matching knots/values (at least 2)");
    if (knots.front() != 0.0 || knots.back() != 1.0 || values.front() != 0.0 ||
        values.back() != 1.0)
      throw DomainError("spline warp must fix the endpoints 0 and 1");
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (!(knots[i] > knots[i - 1]))
        throw DomainError("spline warp knots must be strictly increasing");
      if (!(values[i] > values[i - 1]))
        throw DomainError("spline warp values must be strictly increasing");
    }
    WarpFunction w;
    w.kind_ = Kind::Spline;
    w.knots_ = std::move(knots);
    w.values_ = std::move(values);
    w.init_slopes();
    return w;
  }

  Kind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double x) const
  {
    check_unit(x);
    if (kind_ == Kind::Power)
      return std::pow(x, exponent_);
    std::size_t i = segment(x);
    auto [h, t] = local(i, x);
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * values_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] +
           (-2 * t3 + 3 * t2) * values_[i + 1] + (t3 - t2) * h * slopes_[i + 1];
  }

  double derivative(double x) const
  {
    check_unit(x);
    if (kind_ == Kind::Power)
      return exponent_ * std::pow(x, exponent_ - 1.0);
    std::size_t i = segment(x);
    auto [h, t] = local(i, x);
    double t2 = t * t;
    return ((6 * t2 - 6 * t) * values_[i] + (3 * t2 - 4 * t + 1) * h * slopes_[i] +
            (-6 * t2 + 6 * t) * values_[i + 1] + (3 * t2 - 2 * t) * h * slopes_[i + 1]) /
           h;
  }

  double inverse(double y) const
  {
    check_unit(y);
    if (kind_ == Kind::Power)
      return std::pow(y, 1.0 / exponent_);
    if (y == 0.0 || y == 1.0)
      return y;
    std::size_t i = 0;
    while (i + 2 < values_.size() && y > values_[i + 1])
      ++i;
    double lo = knots_[i], hi = knots_[i + 1];
    // Bisection is enough here: each segment is strictly monotone.
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
      double mid = 0.5 * (lo + hi);
      if ((*this)(mid) < y)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }

private:
  static void check_unit(double x)
  {
    if (!(x >= 0.0 && x <= 1.0))
      throw DomainError("warp argument must lie in [0, 1]");
  }

  std::size_t segment(double x) const
  {
    std::size_t i = 0;
    while (i + 2 < knots_.size() && x > knots_[i + 1])
      ++i;
    return i;
  }

  std::pair<double, double> local(std::size_t i, double x) const
  {
    double h = knots_[i + 1] - knots_[i];
    return { h, (x - knots_[i]) / h };
  }

  void init_slopes()
  {
    std::size_t n = knots_.size();
    std::vector<double> h(n - 1), d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = knots_[i + 1] - knots_[i];
      d[i] = (values_[i + 1] - values_[i]) / h[i];
    }
    slopes_.assign(n, 0.0);
    slopes_[0] = d[0];
    slopes_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
      slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }

  Kind kind_ = Kind::Power;
  double exponent_ = 1.0;
  std::vector<double> knots_, values_, slopes_;
};

// ---------------------------------------------------------------------------
// Family kinds

//! N(theta, I_dim).
struct NormalLocation
{
  int dim = 1;
};

//! Unif(theta, theta + 1).
struct UniformLocation1D
{};

//! theta^-1 f(x / theta) with base f(x) = x^k e^-x / Gamma(k + 1), k > -1.
struct GammaScale
{
  double shape = 0.0;
};

enum class BaseShape
{
  Normal,
  Logistic,
  Laplace
};

//! s^-1 f((x - l) / s) with theta = (l, s) and a standardized symmetric base.
struct LocationScale1D
{
  BaseShape base = BaseShape::Normal;
};

//! exp(theta' T(x) - Lambda(theta)) h(x) on a one-dimensional sample space.
struct ExponentialFamily
{
  std::string name;
  int param_dim = 1;
  Measure measure = Measure::Lebesgue;
  Interval support;
  std::function<Vector(double)> sufficient_statistic;
  std::function<double(double)> log_base;
  std::function<double(const Vector&)> log_partition;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  // Optional closed forms. Empty members fall back to numerical routes.
  std::function<double(const Vector&, double)> cdf;
  std::function<double(const Vector&, double)> quantile;
  std::function<double(const Vector&, double)> quantile_complement;
};

enum class WarpBase
{
  Uniform,
  Beta
};

enum class WarpFamily
{
  Power,
  Spline
};

//! Law of w(X) for X ~ base on [0, 1] and an increasing warp w. For the power
//! family theta = (a); for the spline family theta holds the warp values at
//! the interior knots.
struct TimeWarp1D
{
  WarpBase base = WarpBase::Uniform;
  double beta_a = 2.0;
  double beta_b = 2.0;
  WarpFamily warp = WarpFamily::Power;
  std::vector<double> knots; // spline only; includes 0 and 1
};

using FamilyKind = std::variant<NormalLocation,
                                UniformLocation1D,
                                GammaScale,
                                ExponentialFamily,
                                LocationScale1D,
                                TimeWarp1D>;

struct FamilySpec
{
  FamilyKind kind;
  ParameterBox parameter_space;

  template <class T>
  const T* as() const
  {
    return std::get_if<T>(&kind);
  }

  std::string kind_name() const
  {
    return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, NormalLocation>)
          return "NormalLocation";
        else if constexpr (std::is_same_v<K, UniformLocation1D>)
          return "UniformLocation1D";
        else if constexpr (std::is_same_v<K, GammaScale>)
          return "GammaScale";
        else if constexpr (std::is_same_v<K, ExponentialFamily>)
          return "ExponentialFamily";
        else if constexpr (std::is_same_v<K, LocationScale1D>)
          return "LocationScale1D";
        else
          return "TimeWarp1D";
      },
      kind);
  }

  int data_dim() const
  {
    if (auto n = as<NormalLocation>())
      return n->dim;
    return 1;
  }

  int param_dim() const { return static_cast<int>(parameter_space.dim()); }

  Measure measure() const
  {
    if (auto e = as<ExponentialFamily>())
      return e->measure;
    return Measure::Lebesgue;
  }

  //! Two specs describe the same family (parameters aside).
  bool same_family(const FamilySpec& o) const
  {
    if (kind.index() != o.kind.index())
      return false;
    if (auto n = as<NormalLocation>())
      return n->dim == o.as<NormalLocation>()->dim;
    if (auto g = as<GammaScale>())
      return g->shape == o.as<GammaScale>()->shape;
    if (auto e = as<ExponentialFamily>())
      return e->name == o.as<ExponentialFamily>()->name;
    if (auto l = as<LocationScale1D>())
      return l->base == o.as<LocationScale1D>()->base;
    if (auto t = as<TimeWarp1D>()) {
      auto u = o.as<TimeWarp1D>();
      return t->base == u->base && t->beta_a == u->beta_a && t->beta_b == u->beta_b &&
             t->warp == u->warp && t->knots == u->knots;
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Family factories

inline FamilySpec make_normal_location(int dim = 1)
{
  if (dim < 1)
    throw ModelError("NormalLocation dimension must be >= 1");
  return { NormalLocation{ dim }, ParameterBox::unbounded(dim) };
}

inline FamilySpec make_uniform_location()
{
  return { UniformLocation1D{}, ParameterBox::unbounded(1) };
}

inline FamilySpec make_gamma_scale(double shape)
{
  if (!(shape > -1.0) || !std::isfinite(shape))
    throw ModelError("GammaScale shape k must satisfy k > -1");
  return { GammaScale{ shape }, ParameterBox({ { 1e-6, 1e6 } }) };
}

inline FamilySpec make_location_scale(BaseShape base)
{
  return { LocationScale1D{ base }, ParameterBox({ { -inf, inf }, { 1e-6, 1e6 } }) };
}

namespace detail {

inline bool positive_definite(const Matrix& h)
{
  if (h.rows() != h.cols() || !h.allFinite())
    return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 0.0;
}

} // namespace detail

//! Validates a user-described exponential family: every callback present,
//! and the Hessian of Lambda positive definite at a grid of points of the
//! parameter box (infinite sides clipped to [-5, 5]).
inline FamilySpec make_exponential_family(ExponentialFamily fam, ParameterBox box)
{
  if (!fam.sufficient_statistic || !fam.log_base || !fam.log_partition ||
      !fam.gradient || !fam.hessian)
    throw ModelError("ExponentialFamily '" + fam.name + "' is missing callbacks");
  if (static_cast<int>(box.dim()) != fam.param_dim)
    throw ModelError("ExponentialFamily parameter box has the wrong dimension");

  const int per_axis = 5;
  const int p = fam.param_dim;
  std::vector<int> idx(p, 0);
  for (;;) {
    Vector theta(p);
    for (int j = 0; j < p; ++j) {
      double lo = std::max(box[j].lo, -5.0), hi = std::min(box[j].hi, 5.0);
      if (lo > hi)
        lo = hi = std::isfinite(box[j].lo) ? box[j].lo : box[j].hi;
      double span = hi - lo;
      // interior points only: (i + 1) / (per_axis + 1)
      theta[j] = lo + span * (idx[j] + 1) / (per_axis + 1.0);
    }
    if (!detail::positive_definite(fam.hessian(theta))) {
      std::ostringstream msg;
      msg << "ExponentialFamily '" << fam.name
          << "': log-partition Hessian not positive definite at theta = "
          << theta.transpose();
      throw ModelError(msg.str());
    }
    int j = 0;
    while (j < p && ++idx[j] == per_axis)
      idx[j++] = 0;
    if (j == p)
      break;
  }
  return { std::move(fam), std::move(box) };
}

//! Natural normal family: T(x) = x, h = N(0, 1), Lambda(theta) = theta^2 / 2.
inline FamilySpec make_natural_normal()
{
  ExponentialFamily f;
  f.name = "normal_natural";
  f.support = { -inf, inf };
  f.sufficient_statistic = [](double x) { return Vector::Constant(1, x); };
  f.log_base = [](double x) { return -0.5 * x * x - 0.5 * std::log(2 * std::numbers::pi); };
  f.log_partition = [](const Vector& t) { return 0.5 * t.squaredNorm(); };
  f.gradient = [](const Vector& t) { return t; };
  f.hessian = [](const Vector&) { return Matrix::Identity(1, 1); };
  f.cdf = [](const Vector& t, double x) {
    return 0.5 * std::erfc(-(x - t[0]) / std::numbers::sqrt2);
  };
  f.quantile = [](const Vector& t, double u) {
    return t[0] + boost::math::quantile(boost::math::normal(), u);
  };
  f.quantile_complement = [](const Vector& t, double v) {
    return t[0] - boost::math::quantile(boost::math::normal(), v);
  };
  return make_exponential_family(std::move(f), ParameterBox::unbounded(1));
}

//! Poisson family in natural parameterization: mean e^theta, counting measure.
inline FamilySpec make_poisson()
{
  ExponentialFamily f;
  f.name = "poisson";
  f.measure = Measure::Counting;
  f.support = { 0.0, inf };
  f.sufficient_statistic = [](double x) { return Vector::Constant(1, x); };
  f.log_base = [](double x) {
    if (x < 0 || x != std::floor(x))
      return -inf;
    return -std::lgamma(x + 1.0);
  };
  f.log_partition = [](const Vector& t) { return std::exp(t[0]); };
  f.gradient = [](const Vector& t) { return Vector::Constant(1, std::exp(t[0])); };
  f.hessian = [](const Vector& t) { return Matrix::Constant(1, 1, std::exp(t[0])); };
  f.cdf = [](const Vector& t, double x) {
    if (x < 0)
      return 0.0;
    return boost::math::gamma_q(std::floor(x) + 1.0, std::exp(t[0]));
  };
  return make_exponential_family(std::move(f), ParameterBox({ { -30.0, 30.0 } }));
}

//! Exponential distributions with rate theta > 0 written as T(x) = -x,
//! h = 1 on (0, inf), Lambda(theta) = -log(theta).
inline FamilySpec make_exponential_rate()
{
  ExponentialFamily f;
  f.name = "exponential";
  f.support = { 0.0, inf };
  f.sufficient_statistic = [](double x) { return Vector::Constant(1, -x); };
  f.log_base = [](double x) { return x >= 0 ? 0.0 : -inf; };
  f.log_partition = [](const Vector& t) { return -std::log(t[0]); };
  f.gradient = [](const Vector& t) { return Vector::Constant(1, -1.0 / t[0]); };
  f.hessian = [](const Vector& t) { return Matrix::Constant(1, 1, 1.0 / (t[0] * t[0])); };
  f.cdf = [](const Vector& t, double x) { return x <= 0 ? 0.0 : -std::expm1(-t[0] * x); };
  f.quantile = [](const Vector& t, double u) { return -std::log1p(-u) / t[0]; };
  f.quantile_complement = [](const Vector& t, double v) { return -std::log(v) / t[0]; };
  return make_exponential_family(std::move(f), ParameterBox({ { 1e-6, 1e6 } }));
}

inline FamilySpec make_time_warp_power(WarpBase base = WarpBase::Uniform,
                                       double beta_a = 2.0,
                                       double beta_b = 2.0)
{
  if (base == WarpBase::Beta && !(beta_a > 0 && beta_b > 0))
    throw ModelError("Beta base parameters must be positive");
  TimeWarp1D t{ base, beta_a, beta_b, WarpFamily::Power, {} };
  return { t, ParameterBox({ { 0.01, 100.0 } }) };
}

inline FamilySpec make_time_warp_spline(std::vector<double> knots,
                                        WarpBase base = WarpBase::Uniform,
                                        double beta_a = 2.0,
                                        double beta_b = 2.0)
{
  if (knots.size() < 3 || knots.front() != 0.0 || knots.back() != 1.0)
    throw ModelError("spline warp knots must start at 0, end at 1, and have an interior knot");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1]))
      throw ModelError("spline warp knots must be strictly increasing");
  std::size_t p = knots.size() - 2;
  TimeWarp1D t{ base, beta_a, beta_b, WarpFamily::Spline, std::move(knots) };
  return { t, ParameterBox(std::vector<Interval>(p, Interval{ 0.0, 1.0 })) };
}

// ---------------------------------------------------------------------------
// Densities

struct Density
{
  FamilySpec family;
  Vector theta;

  Density(FamilySpec fam, Vector th)
    : family(std::move(fam))
    , theta(std::move(th))
  {
    validate();
  }

  Density(FamilySpec fam, double th)
    : Density(std::move(fam), Vector::Constant(1, th))
  {}

  int data_dim() const { return family.data_dim(); }
  bool is_1d() const { return family.data_dim() == 1; }

private:
  void validate() const
  {
    if (!family.parameter_space.contains(theta)) {
      std::ostringstream msg;
      msg << family.kind_name() << ": theta = " << theta.transpose()
          << " lies outside the parameter space";
      throw DomainError(msg.str());
    }
    if (auto t = family.as<TimeWarp1D>(); t && t->warp == WarpFamily::Spline) {
      double prev = 0.0;
      for (int i = 0; i < theta.size(); ++i) {
        if (!(theta[i] > prev))
          throw DomainError("TimeWarp1D spline values must be strictly increasing in (0, 1)");
        prev = theta[i];
      }
      if (!(prev < 1.0))
        throw DomainError("TimeWarp1D spline values must be strictly increasing in (0, 1)");
    }
  }
};

//! Observations x_{i,j} from one density, stored row-major (size() x dim).
struct SampleSet
{
  std::string source_id;
  int dim = 1;
  std::uint64_t seed = 0;
  std::vector<double> data;

  std::size_t size() const { return dim > 0 ? data.size() / dim : 0; }
  std::span<const double> point(std::size_t i) const
  {
    return { data.data() + i * dim, static_cast<std::size_t>(dim) };
  }
};

//! Warp of a TimeWarp1D density.
inline WarpFunction warp_of(const Density& d)
{
  auto t = d.family.as<TimeWarp1D>();
  if (!t)
    throw UnsupportedError("warp_of: not a TimeWarp1D density");
  if (t->warp == WarpFamily::Power)
    return WarpFunction::power(d.theta[0]);
  std::vector<double> values;
  values.push_back(0.0);
  for (int i = 0; i < d.theta.size(); ++i)
    values.push_back(d.theta[i]);
  values.push_back(1.0);
  return WarpFunction::spline(t->knots, std::move(values));
}

inline double warp_apply(const WarpFunction& w, double x) { return w(x); }

namespace detail {

inline const double log_sqrt_2pi = 0.5 * std::log(2 * std::numbers::pi);

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double std_normal_quantile(double u)
{
  return boost::math::quantile(boost::math::normal(), u);
}

inline double base_log_pdf(BaseShape b, double z)
{
  switch (b) {
    case BaseShape::Normal:
      return -0.5 * z * z - log_sqrt_2pi;
    case BaseShape::Logistic: {
      double a = std::abs(z);
      return -a - 2.0 * std::log1p(std::exp(-a));
    }
    case BaseShape::Laplace:
      return -std::abs(z) - std::numbers::ln2;
  }
  return -inf;
}

inline double base_cdf(BaseShape b, double z)
{
  switch (b) {
    case BaseShape::Normal:
      return std_normal_cdf(z);
    case BaseShape::Logistic:
      return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    case BaseShape::Laplace:
      return z < 0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
  }
  return 0.0;
}

inline double base_quantile(BaseShape b, double u)
{
  switch (b) {
    case BaseShape::Normal:
      return std_normal_quantile(u);
    case BaseShape::Logistic:
      return std::log(u) - std::log1p(-u);
    case BaseShape::Laplace:
      return u < 0.5 ? std::log(2 * u) : -std::log(2 * (1 - u));
  }
  return 0.0;
}

inline double base_variance(BaseShape b)
{
  switch (b) {
    case BaseShape::Normal:
      return 1.0;
    case BaseShape::Logistic:
      return std::numbers::pi * std::numbers::pi / 3.0;
    case BaseShape::Laplace:
      return 2.0;
  }
  return 1.0;
}

//! Tail cut (in base units) beyond which the base mass is below ~1e-18.
inline double base_tail_cut(BaseShape b)
{
  return b == BaseShape::Normal ? 10.0 : 42.0;
}

inline double warp_base_log_pdf(const TimeWarp1D& t, double x)
{
  if (x < 0 || x > 1)
    return -inf;
  if (t.base == WarpBase::Uniform)
    return 0.0;
  return std::log(boost::math::ibeta_derivative(t.beta_a, t.beta_b, x));
}

inline double warp_base_cdf(const TimeWarp1D& t, double x)
{
  x = std::clamp(x, 0.0, 1.0);
  return t.base == WarpBase::Uniform ? x : boost::math::ibeta(t.beta_a, t.beta_b, x);
}

inline double warp_base_quantile(const TimeWarp1D& t, double u)
{
  return t.base == WarpBase::Uniform ? u : boost::math::ibeta_inv(t.beta_a, t.beta_b, u);
}

inline double warp_base_quantile_complement(const TimeWarp1D& t, double v)
{
  return t.base == WarpBase::Uniform ? 1.0 - v
                                     : boost::math::ibetac_inv(t.beta_a, t.beta_b, v);
}

inline void check_open_unit(double u)
{
  if (!(u > 0.0 && u < 1.0))
    throw DomainError("quantile level must lie strictly inside (0, 1)");
}

inline void require_1d(const Density& d, const char* op)
{
  if (d.data_dim() != 1)
    throw UnsupportedError(std::string(op) + ": " + d.family.kind_name() +
                           " is multivariate");
}

//! Bracketed inversion of a continuous cdf: bisection until the bracket is
//! narrow, then safeguarded Newton steps. Stops when |cdf(x) - u| <= 1e-12.
template <class Cdf, class Pdf>
double invert_cdf(Cdf&& cdf, Pdf&& pdf, double u, double lo, double hi)
{
  double step = 1.0;
  if (!std::isfinite(lo)) {
    lo = std::isfinite(hi) ? hi - 1.0 : -1.0;
    while (cdf(lo) > u) {
      lo -= step;
      step *= 2;
    }
  }
  step = 1.0;
  if (!std::isfinite(hi)) {
    hi = lo + 1.0;
    while (cdf(hi) < u) {
      hi += step;
      step *= 2;
    }
  }
  const double tol = 1e-12;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    x = 0.5 * (lo + hi);
    double fx = cdf(x) - u;
    if (std::abs(fx) <= tol || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::abs(x))
      return x;
    if (fx < 0)
      lo = x;
    else
      hi = x;
    if (hi - lo < 1e-3 * (1.0 + std::abs(x)))
      break;
  }
  for (int it = 0; it < 100; ++it) {
    double fx = cdf(x) - u;
    if (std::abs(fx) <= tol)
      return x;
    if (fx < 0)
      lo = x;
    else
      hi = x;
    double p = pdf(x);
    double nx = p > 0 ? x - fx / p : 0.5 * (lo + hi);
    if (!(nx > lo && nx < hi))
      nx = 0.5 * (lo + hi);
    if (nx == x)
      return x;
    x = nx;
  }
  return x;
}

//! Smallest integer n >= lo with cdf(n) >= u.
template <class Cdf>
double discrete_quantile(Cdf&& cdf, double u, double lo)
{
  double a = lo, b = lo, step = 1.0;
  while (cdf(b) < u) {
    a = b + 1;
    b += step;
    step *= 2;
  }
  while (a < b) {
    double m = std::floor(0.5 * (a + b));
    if (cdf(m) >= u)
      b = m;
    else
      a = m + 1;
  }
  return b;
}

} // namespace detail

//! log f_theta(x) for one-dimensional data; -inf outside the support.
inline double log_pdf(const Density& d, double x)
{
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> double {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, NormalLocation>) {
        if (k.dim != 1)
          throw UnsupportedError("log_pdf(double): NormalLocation is multivariate");
        double z = x - th[0];
        return -0.5 * z * z - detail::log_sqrt_2pi;
      } else if constexpr (std::is_same_v<K, UniformLocation1D>) {
        return (x >= th[0] && x <= th[0] + 1.0) ? 0.0 : -inf;
      } else if constexpr (std::is_same_v<K, GammaScale>) {
        if (x < 0)
          return -inf;
        double s = th[0];
        if (x == 0) {
          if (k.shape == 0)
            return -std::log(s);
          return k.shape > 0 ? -inf : inf;
        }
        return k.shape * std::log(x) - x / s - (k.shape + 1) * std::log(s) -
               std::lgamma(k.shape + 1);
      } else if constexpr (std::is_same_v<K, ExponentialFamily>) {
        double lh = k.log_base(x);
        if (!(lh > -inf) || !k.support.contains(x))
          return -inf;
        return th.dot(k.sufficient_statistic(x)) - k.log_partition(th) + lh;
      } else if constexpr (std::is_same_v<K, LocationScale1D>) {
        return detail::base_log_pdf(k.base, (x - th[0]) / th[1]) - std::log(th[1]);
      } else {
        if (x < 0 || x > 1)
          return -inf;
        auto w = warp_of(d);
        double xi = w.inverse(x);
        return detail::warp_base_log_pdf(k, xi) - std::log(w.derivative(xi));
      }
    },
    d.family.kind);
}

//! f_theta(x); 0 outside the support. For counting-measure families this is
//! the probability mass at x.
inline double pdf(const Density& d, double x)
{
  return std::exp(log_pdf(d, x));
}

inline double pdf(const Density& d, const Vector& x)
{
  if (x.size() != d.data_dim())
    throw DomainError("pdf: point dimension does not match the family");
  if (auto n = d.family.as<NormalLocation>(); n && n->dim > 1) {
    double q = (x - d.theta).squaredNorm();
    return std::exp(-0.5 * q - n->dim * detail::log_sqrt_2pi);
  }
  return pdf(d, x[0]);
}

inline double cdf_1d(const Density& d, double x)
{
  detail::require_1d(d, "cdf_1d");
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> double {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, NormalLocation>) {
        return detail::std_normal_cdf(x - th[0]);
      } else if constexpr (std::is_same_v<K, UniformLocation1D>) {
        return std::clamp(x - th[0], 0.0, 1.0);
      } else if constexpr (std::is_same_v<K, GammaScale>) {
        return x <= 0 ? 0.0 : boost::math::gamma_p(k.shape + 1, x / th[0]);
      } else if constexpr (std::is_same_v<K, ExponentialFamily>) {
        if (k.cdf)
          return k.cdf(th, x);
        if (x < k.support.lo)
          return 0.0;
        if (x >= k.support.hi)
          return 1.0;
        if (k.measure == Measure::Counting) {
          double s = 0.0;
          for (double n = std::ceil(k.support.lo); n <= x; n += 1.0)
            s += pdf(d, n);
          return std::min(1.0, s);
        }
        // Numerical fallback: Gauss-Kronrod from the lower end of support.
        double lo = std::isfinite(k.support.lo) ? k.support.lo : x - 60.0;
        double err = 0.0;
        double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [&](double t) { return pdf(d, t); }, lo, x, 20, 1e-13, &err);
        return std::clamp(v, 0.0, 1.0);
      } else if constexpr (std::is_same_v<K, LocationScale1D>) {
        return detail::base_cdf(k.base, (x - th[0]) / th[1]);
      } else {
        if (x <= 0)
          return 0.0;
        if (x >= 1)
          return 1.0;
        return detail::warp_base_cdf(k, warp_of(d).inverse(x));
      }
    },
    d.family.kind);
}

//! Generalized inverse of cdf_1d: inf{x : F(x) >= u}.
inline double quantile_1d(const Density& d, double u)
{
  detail::require_1d(d, "quantile_1d");
  detail::check_open_unit(u);
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> double {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, NormalLocation>) {
        return th[0] + detail::std_normal_quantile(u);
      } else if constexpr (std::is_same_v<K, UniformLocation1D>) {
        return th[0] + u;
      } else if constexpr (std::is_same_v<K, GammaScale>) {
        return th[0] * boost::math::gamma_p_inv(k.shape + 1, u);
      } else if constexpr (std::is_same_v<K, ExponentialFamily>) {
        if (k.quantile)
          return k.quantile(th, u);
        auto F = [&](double x) { return cdf_1d(d, x); };
        if (k.measure == Measure::Counting)
          return detail::discrete_quantile(F, u, std::ceil(k.support.lo));
        return detail::invert_cdf(F, [&](double x) { return pdf(d, x); }, u,
                                  k.support.lo, k.support.hi);
      } else if constexpr (std::is_same_v<K, LocationScale1D>) {
        return th[0] + th[1] * detail::base_quantile(k.base, u);
      } else {
        return warp_of(d)(detail::warp_base_quantile(k, u));
      }
    },
    d.family.kind);
}

//! quantile_1d(d, 1 - v) evaluated without forming 1 - v, so upper tails
//! stay accurate for tiny v.
inline double quantile_complement_1d(const Density& d, double v)
{
  detail::require_1d(d, "quantile_complement_1d");
  detail::check_open_unit(v);
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> double {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, NormalLocation>) {
        return th[0] - detail::std_normal_quantile(v);
      } else if constexpr (std::is_same_v<K, UniformLocation1D>) {
        return th[0] + 1.0 - v;
      } else if constexpr (std::is_same_v<K, GammaScale>) {
        return th[0] * boost::math::gamma_q_inv(k.shape + 1, v);
      } else if constexpr (std::is_same_v<K, ExponentialFamily>) {
        if (k.quantile_complement)
          return k.quantile_complement(th, v);
        if (k.measure == Measure::Counting && k.name == "poisson") {
          double lambda = std::exp(th[0]);
          // smallest n with P(X > n) = P(n + 1, lambda) <= v
          return detail::discrete_quantile(
            [&](double n) { return -boost::math::gamma_p(n + 1.0, lambda); }, -v, 0.0);
        }
        return quantile_1d(d, 1.0 - v);
      } else if constexpr (std::is_same_v<K, LocationScale1D>) {
        return th[0] - th[1] * detail::base_quantile(k.base, v);
      } else {
        return warp_of(d)(detail::warp_base_quantile_complement(k, v));
      }
    },
    d.family.kind);
}

//! Support of f_theta (closure), possibly unbounded.
inline Interval support_1d(const Density& d)
{
  detail::require_1d(d, "support_1d");
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> Interval {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, UniformLocation1D>)
        return { th[0], th[0] + 1.0 };
      else if constexpr (std::is_same_v<K, GammaScale>)
        return { 0.0, inf };
      else if constexpr (std::is_same_v<K, ExponentialFamily>)
        return k.support;
      else if constexpr (std::is_same_v<K, TimeWarp1D>)
        return { 0.0, 1.0 };
      else
        return { -inf, inf };
    },
    d.family.kind);
}

//! Truncated support used for quadrature: the mass left outside is below
//! ~1e-18 (normal bases are cut at +-10 sigma).
inline Interval effective_support(const Density& d)
{
  detail::require_1d(d, "effective_support");
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> Interval {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, NormalLocation>) {
        return { th[0] - 10.0, th[0] + 10.0 };
      } else if constexpr (std::is_same_v<K, UniformLocation1D>) {
        return { th[0], th[0] + 1.0 };
      } else if constexpr (std::is_same_v<K, GammaScale>) {
        return { 0.0, th[0] * boost::math::gamma_q_inv(k.shape + 1, 1e-18) };
      } else if constexpr (std::is_same_v<K, ExponentialFamily>) {
        if (k.name == "normal_natural")
          return { th[0] - 10.0, th[0] + 10.0 };
        double lo = std::isfinite(k.support.lo) ? k.support.lo
                                                 : quantile_1d(d, 1e-18);
        double hi = std::isfinite(k.support.hi) ? k.support.hi
                                                 : quantile_complement_1d(d, 1e-18);
        return { lo, hi };
      } else if constexpr (std::is_same_v<K, LocationScale1D>) {
        double c = detail::base_tail_cut(k.base);
        return { th[0] - c * th[1], th[0] + c * th[1] };
      } else {
        return { 0.0, 1.0 };
      }
    },
    d.family.kind);
}

//! Points where the density has a jump or kink; quadrature splits there.
inline std::vector<double> breakpoints(const Density& d)
{
  detail::require_1d(d, "breakpoints");
  const auto& th = d.theta;
  return std::visit(
    [&](const auto& k) -> std::vector<double> {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, NormalLocation>) {
        return { th[0] };
      } else if constexpr (std::is_same_v<K, UniformLocation1D>) {
        return { th[0], th[0] + 1.0 };
      } else if constexpr (std::is_same_v<K, GammaScale>) {
        std::vector<double> b{ 0.0 };
        if (k.shape > 0)
          b.push_back(th[0] * k.shape);
        return b;
      } else if constexpr (std::is_same_v<K, ExponentialFamily>) {
        std::vector<double> b;
        if (std::isfinite(k.support.lo))
          b.push_back(k.support.lo);
        if (std::isfinite(k.support.hi))
          b.push_back(k.support.hi);
        if (k.name == "normal_natural")
          b.push_back(th[0]);
        return b;
      } else if constexpr (std::is_same_v<K, LocationScale1D>) {
        return { th[0] };
      } else {
        std::vector<double> b{ 0.0, 1.0 };
        if (k.warp == WarpFamily::Spline)
          for (int i = 0; i < th.size(); ++i)
            b.push_back(th[i]);
        return b;
      }
    },
    d.family.kind);
}

struct LogPartition
{
  double value;
  Vector gradient;
  Matrix hessian;
};

//! Lambda, its gradient and Hessian at theta. Throws ModelError when the
//! Hessian is not positive definite there.
inline LogPartition log_partition(const FamilySpec& fam, const Vector& theta)
{
  auto e = fam.as<ExponentialFamily>();
  if (!e)
    throw UnsupportedError("log_partition: " + fam.kind_name() +
                           " is not an exponential family");
  if (!fam.parameter_space.contains(theta))
    throw DomainError("log_partition: theta outside the parameter space");
  LogPartition lp{ e->log_partition(theta), e->gradient(theta), e->hessian(theta) };
  if (!detail::positive_definite(lp.hessian))
    throw ModelError("log_partition: Hessian of Lambda is not positive definite");
  return lp;
}

//! m i.i.d. draws, one CounterRng stream keyed by `seed`. One-dimensional
//! families use inverse-cdf sampling; NormalLocation(dim) maps each
//! coordinate through the standard normal quantile.
inline SampleSet sample(const Density& d, std::size_t m, std::uint64_t seed,
                        std::string source_id = {})
{
  if (m < 1)
    throw DomainError("sample: m must be >= 1");
  CounterRng rng(seed);
  SampleSet s;
  s.source_id = std::move(source_id);
  s.dim = d.data_dim();
  s.seed = seed;
  s.data.resize(m * s.dim);
  if (s.dim > 1) {
    for (std::size_t i = 0; i < m; ++i)
      for (int j = 0; j < s.dim; ++j)
        s.data[i * s.dim + j] = d.theta[j] + detail::std_normal_quantile(rng.next_open01());
    return s;
  }
  for (std::size_t i = 0; i < m; ++i)
    s.data[i] = quantile_1d(d, rng.next_open01());
  return s;
}

//! Affine (location-scale) description f_theta(x) = s^-1 g((x - l) / s) of a
//! one-dimensional density with base moments, when the family has one.
struct AffineView
{
  double location;
  double scale;
  double base_mean;
  double base_variance;
};

inline std::optional<AffineView> affine_view(const Density& d)
{
  const auto& th = d.theta;
  if (auto n = d.family.as<NormalLocation>(); n && n->dim == 1)
    return AffineView{ th[0], 1.0, 0.0, 1.0 };
  if (d.family.as<UniformLocation1D>())
    return AffineView{ th[0], 1.0, 0.5, 1.0 / 12.0 };
  if (auto g = d.family.as<GammaScale>())
    return AffineView{ 0.0, th[0], g->shape + 1, g->shape + 1 };
  if (auto l = d.family.as<LocationScale1D>())
    return AffineView{ th[0], th[1], 0.0, detail::base_variance(l->base) };
  return std::nullopt;
}

} // namespace fmds
