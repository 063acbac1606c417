#pragma once

#include "error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <span>
#include <sstream>
#include <vector>

namespace fmds::quad {

enum class Rule
{
  GaussKronrod,
  //! Tanh-sinh first (cheap on integrable endpoint singularities), adaptive
  //! Gauss-Kronrod when its error estimate misses the tolerance.
  TanhSinh
};

struct Options
{
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
  //! Maximum number of subintervals held by the adaptive driver.
  std::size_t max_segments = 4000;
  Rule rule = Rule::GaussKronrod;
};

struct Result
{
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

struct Segment
{
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b)
{
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double err = 0.0;
  auto mapped = [&](double t) { return f(mid + half * t); };
  double r = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
    mapped, -1.0, 1.0, 0, 0.0, &err);
  return { a, b, half * r, half * err };
}

} // namespace detail

//! Globally adaptive Gauss-Kronrod (21-point rule, worst segment bisected
//! first) on a finite interval. Stops once the summed error estimate is below
//! max(abs_tol, rel_tol * |value|). Throws NumericError carrying the residual
//! estimate when the segment budget runs out first.
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {})
{
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw DomainError("quad::integrate: interval endpoints must be finite");
  if (a == b)
    return {};
  if (a > b) {
    Result r = integrate(f, b, a, opt);
    return { -r.value, r.error };
  }
  // Boost's tanh-sinh asserts on intervals too narrow relative to their
  // endpoints; those go straight to Gauss-Kronrod.
  if (opt.rule == Rule::TanhSinh && b - a > 1e-6 * std::max({ 1.0, std::abs(a), std::abs(b) })) {
    // one instance per nesting depth: Boost's integrator is not reentrant
    thread_local std::vector<std::unique_ptr<boost::math::quadrature::tanh_sinh<double>>> pool;
    thread_local std::size_t depth = 0;
    if (pool.size() <= depth)
      pool.push_back(std::make_unique<boost::math::quadrature::tanh_sinh<double>>(12));
    auto& ts = *pool[depth];
    struct Nest
    {
      std::size_t& d;
      ~Nest() { --d; }
    } nest{ ++depth };
    try {
      double err = 0.0;
      double v = ts.integrate([&](double x) { return f(x); }, a, b, opt.rel_tol, &err);
      // err is an absolute estimate of the last level difference
      if (std::isfinite(v) && err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(v)))
        return { v, err };
    } catch (const std::exception&) {
    }
  }

  std::priority_queue<detail::Segment> heap;
  auto first = detail::gk21(f, a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);

  auto done = [&] {
    return total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
  };

  while (!done()) {
    if (heap.size() >= opt.max_segments)
      break;
    auto worst = heap.top();
    double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b))
      break; // interval collapsed to floating-point resolution
    heap.pop();
    auto left = detail::gk21(f, worst.a, mid);
    auto right = detail::gk21(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum from the segments to shed the drift of incremental updates.
  total = 0.0;
  total_err = 0.0;
  std::vector<detail::Segment> segs;
  segs.reserve(heap.size());
  while (!heap.empty()) {
    segs.push_back(heap.top());
    heap.pop();
  }
  std::sort(segs.begin(), segs.end(),
            [](const auto& l, const auto& r) { return l.a < r.a; });
  for (const auto& s : segs) {
    total += s.value;
    total_err += s.error;
  }

  if (!(total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total)))) {
    if (!std::isfinite(total))
      throw NumericError("quadrature produced a non-finite value", total_err);
    std::ostringstream msg;
    msg << "adaptive quadrature did not converge on [" << a << ", " << b
        << "]: error estimate " << total_err;
    throw NumericError(msg.str(), total_err);
  }
  return { total, total_err };
}

//! Integrates over consecutive pieces [breaks[i], breaks[i+1]]. Breakpoints
//! mark kinks or jumps of the integrand so no rule straddles them. The
//! tolerance budget is shared across pieces.
template <class F>
Result integrate_pieces(F&& f, std::span<const double> breaks, const Options& opt = {})
{
  Result out;
  if (breaks.size() < 2)
    return out;
  Options piece = opt;
  piece.abs_tol = opt.abs_tol / static_cast<double>(breaks.size() - 1);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] <= breaks[i])
      continue;
    Result r = integrate(f, breaks[i], breaks[i + 1], piece);
    out.value += r.value;
    out.error += r.error;
  }
  return out;
}

//! Sorts, deduplicates and clips breakpoints to [lo, hi] (which are kept).
inline std::vector<double> make_breaks(std::vector<double> pts, double lo, double hi)
{
  pts.push_back(lo);
  pts.push_back(hi);
  std::erase_if(pts, [&](double x) { return !(x >= lo && x <= hi); });
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

//! Sum of f(k) over integers k in [lo, hi] (counting-measure integral),
//! Neumaier-compensated.
template <class F>
double sum_integers(F&& f, long lo, long hi)
{
  double s = 0.0, c = 0.0;
  for (long k = lo; k <= hi; ++k) {
    double v = f(static_cast<double>(k));
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  return s + c;
}

} // namespace fmds::quad
