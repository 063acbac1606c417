#pragma once

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace fmds {

enum class BandwidthRule
{
  Fixed,
  Silverman
};

//! Kernel density estimator settings. With BandwidthRule::Silverman the
//! kernel's bandwidth field is ignored and replaced per sample.
struct KdeConfig
{
  KernelSpec kernel{};
  BandwidthRule rule = BandwidthRule::Silverman;

  static KdeConfig fixed(KernelSpec k) { return { k.validated(), BandwidthRule::Fixed }; }
  static KdeConfig silverman(KernelSpec::Form form = KernelSpec::Form::Gaussian)
  {
    return { KernelSpec{ form, 1.0 }, BandwidthRule::Silverman };
  }
};

namespace detail {

inline void require_1d_sample(const SampleSet& s, const char* op)
{
  if (s.size() == 0)
    throw DomainError(std::string(op) + ": empty sample");
  if (s.dim != 1)
    throw UnsupportedError(std::string(op) + ": only one-dimensional samples are supported");
}

inline double sample_sd(const std::vector<double>& x)
{
  if (x.size() < 2)
    return 0.0;
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double ss = 0.0;
  for (double v : x)
    ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (x.size() - 1));
}

} // namespace detail

//! Silverman's rule b = 1.06 sd m^{-1/5}. The triweight kernel is rescaled to
//! the same standard deviation (its sd is b/3 for half-width b).
inline KernelSpec resolve_bandwidth(const KdeConfig& cfg, const SampleSet& s)
{
  if (cfg.rule == BandwidthRule::Fixed)
    return cfg.kernel.validated();
  detail::require_1d_sample(s, "resolve_bandwidth");
  double sd = detail::sample_sd(s.data);
  double b = 1.06 * sd * std::pow(static_cast<double>(s.size()), -0.2);
  if (!(b > 0.0))
    throw DomainError("Silverman bandwidth is zero (constant sample); use a fixed bandwidth");
  if (cfg.kernel.form == KernelSpec::Form::TriweightConvolution)
    b *= 3.0;
  return KernelSpec{ cfg.kernel.form, b };
}

//! A KDE: the sample, sorted for windowed evaluation, with a resolved kernel.
struct EstimatedDensity
{
  SampleSet sample;
  KdeConfig config;
  KernelSpec kernel; // resolved bandwidth
  std::vector<double> sorted;

  EstimatedDensity(SampleSet s, KdeConfig cfg)
    : sample(std::move(s))
    , config(cfg)
  {
    detail::require_1d_sample(sample, "EstimatedDensity");
    kernel = resolve_bandwidth(config, sample);
    sorted = sample.data;
    std::sort(sorted.begin(), sorted.end());
  }

  double bandwidth() const { return kernel.bandwidth; }

  //! Same value as kde_evaluate up to kernel terms beyond 10 bandwidths
  //! (each below e^-50 of the peak for the Gaussian, exactly 0 otherwise).
  double windowed(double x) const
  {
    double r = kernel.smoothing_radius();
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - r);
    auto hi = std::upper_bound(lo, sorted.end(), x + r);
    double s = 0.0;
    for (auto it = lo; it != hi; ++it)
      s += kernel.smoothing(x - *it);
    return s / static_cast<double>(sorted.size());
  }

  Interval support() const
  {
    double r = kernel.smoothing_radius();
    return { sorted.front() - r, sorted.back() + r };
  }
};

//! (1/m) sum_i kappa(x - x_i), summed over every observation.
inline double kde_evaluate(const EstimatedDensity& e, double x)
{
  double s = 0.0;
  for (double xi : e.sample.data)
    s += e.kernel.smoothing(x - xi);
  return s / static_cast<double>(e.sample.size());
}

namespace detail {

inline const quad::Options& plugin_quad_options()
{
  static const quad::Options opt{ 1e-9, 1e-8, 20000 };
  return opt;
}

template <class H>
double integrate_kde_pair(const EstimatedDensity& a, const EstimatedDensity& b, H&& h)
{
  Interval sa = a.support(), sb = b.support();
  double lo = std::min(sa.lo, sb.lo), hi = std::max(sa.hi, sb.hi);
  // Pieces of roughly one bandwidth keep the first GK pass from
  // under-resolving a multimodal estimate.
  double step = std::min(a.bandwidth(), b.bandwidth());
  std::size_t pieces = std::clamp<std::size_t>(
    static_cast<std::size_t>(std::ceil((hi - lo) / step)), 1, 2000);
  std::vector<double> breaks(pieces + 1);
  for (std::size_t i = 0; i <= pieces; ++i)
    breaks[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(pieces);
  breaks.back() = hi;
  return quad::integrate_pieces(h, breaks, plugin_quad_options()).value;
}

} // namespace detail

//! Dissimilarity between the KDEs of two samples (L2 or Hellinger).
inline double plugin_distance(const EstimatedDensity& a, const EstimatedDensity& b,
                              const DissimilaritySpec& spec)
{
  if (spec.kind == DissimilarityKind::L2) {
    double v = detail::integrate_kde_pair(a, b, [&](double x) {
      double d = a.windowed(x) - b.windowed(x);
      return d * d;
    });
    return std::sqrt(std::max(v, 0.0));
  }
  if (spec.kind == DissimilarityKind::Hellinger) {
    double v = detail::integrate_kde_pair(a, b, [&](double x) {
      double d = std::sqrt(a.windowed(x)) - std::sqrt(b.windowed(x));
      return d * d;
    });
    return std::sqrt(std::max(v, 0.0));
  }
  throw UnsupportedError("plug-in estimation supports L2 and Hellinger only, not " + spec.name());
}

inline double plugin_distance(const SampleSet& a, const SampleSet& b,
                              const DissimilaritySpec& spec, const KdeConfig& cfg = KdeConfig::silverman())
{
  return plugin_distance(EstimatedDensity(a, cfg), EstimatedDensity(b, cfg), spec);
}

namespace detail {

//! Sum of K(x_i - y_j) over i in [0, n), j in [0, m). With `within` set,
//! x and y are the same sample and the sum runs over i != j (each unordered
//! pair once, doubled). Rows are split into fixed blocks whose partial sums
//! are added in block order, so the result does not depend on the thread count.
template <class K>
double kernel_block_sum(const std::vector<double>& x, const std::vector<double>& y, K&& k,
                        bool within)
{
  constexpr std::size_t block = 64;
  const std::size_t nb = (x.size() + block - 1) / block;
  std::vector<double> partial(nb, 0.0);
  parallel_for(nb, [&](std::size_t b) {
    double s = 0.0;
    std::size_t end = std::min(x.size(), (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i) {
      double row = 0.0;
      for (std::size_t j = within ? i + 1 : 0; j < y.size(); ++j)
        row += k(x[i] - y[j]);
      s += row;
    }
    partial[b] = s;
  });
  double total = 0.0;
  for (double p : partial)
    total += p;
  return within ? 2.0 * total : total;
}

template <class K>
double mmd_ustat_with(const std::vector<double>& a, const std::vector<double>& b, K&& k)
{
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  double aa = kernel_block_sum(a, a, k, true) / (n * (n - 1));
  double bb = kernel_block_sum(b, b, k, true) / (m * (m - 1));
  double ab = kernel_block_sum(a, b, k, false) / (n * m);
  return aa + bb - 2.0 * ab;
}

} // namespace detail

//! Unbiased U-statistic for the squared RKHS distance with K = kappa * kappa.
//! May be negative.
inline double mmd_ustat(const SampleSet& a, const SampleSet& b, const KernelSpec& k)
{
  k.validated();
  detail::require_1d_sample(a, "mmd_ustat");
  detail::require_1d_sample(b, "mmd_ustat");
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  if (n < 2 || m < 2)
    throw DomainError("mmd_ustat: each sample needs at least 2 observations");
  if (k.form == KernelSpec::Form::Gaussian) {
    const double s2 = 2.0 * k.bandwidth * k.bandwidth;
    const double c = 1.0 / std::sqrt(2 * std::numbers::pi * s2), e = -0.5 / s2;
    return c * detail::mmd_ustat_with(a.data, b.data, [e](double u) { return std::exp(e * u * u); });
  }
  return detail::mmd_ustat_with(a.data, b.data, [&](double u) { return k.rkhs(u); });
}

//! W2 distance between empirical laws. Equal sizes pair sorted samples;
//! unequal sizes integrate the squared difference of the two step quantile
//! functions exactly, piece by piece between merged jump levels.
inline double empirical_w2_1d(const SampleSet& a, const SampleSet& b)
{
  detail::require_1d_sample(a, "empirical_w2_1d");
  detail::require_1d_sample(b, "empirical_w2_1d");
  std::vector<double> x = a.data, y = b.data;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s / static_cast<double>(x.size()));
  }
  const std::size_t n = x.size(), m = y.size();
  // Quantile of x on (i/n, (i+1)/n] is x[i]; compare levels as i*m vs j*n
  // in integers to place the merged breakpoints exactly.
  std::size_t i = 0, j = 0;
  double s = 0.0;
  std::size_t prev = 0; // current level times n*m
  while (i < n && j < m) {
    std::size_t next_x = (i + 1) * m, next_y = (j + 1) * n;
    std::size_t next = std::min(next_x, next_y);
    double d = x[i] - y[j];
    s += d * d * static_cast<double>(next - prev);
    prev = next;
    if (next_x == next)
      ++i;
    if (next_y == next)
      ++j;
  }
  return std::sqrt(s / (static_cast<double>(n) * static_cast<double>(m)));
}

// ---------------------------------------------------------------------------
// Sample-setting matrices

//! Estimator choices for sample-based matrices: L2 and Hellinger use KDE
//! plug-ins, RKHS the U-statistic (clamped at 0 before the square root),
//! Wasserstein2 the empirical quantile coupling.
struct EstimatorConfig
{
  KdeConfig kde = KdeConfig::silverman();
};

inline double sample_dissimilarity(const SampleSet& a, const SampleSet& b,
                                   const DissimilaritySpec& spec, const EstimatorConfig& cfg = {})
{
  switch (spec.kind) {
    case DissimilarityKind::L2:
    case DissimilarityKind::Hellinger:
      return plugin_distance(a, b, spec, cfg.kde);
    case DissimilarityKind::Rkhs:
      return std::sqrt(std::max(mmd_ustat(a, b, spec.kernel), 0.0));
    case DissimilarityKind::Wasserstein2:
      return empirical_w2_1d(a, b);
    default:
      throw UnsupportedError("no sample estimator for " + spec.name() +
                             " (KDE plug-in divergences are unstable under support mismatch)");
  }
}

inline DissimilarityMatrix pairwise_matrix(const std::vector<SampleSet>& items,
                                           const DissimilaritySpec& spec,
                                           const EstimatorConfig& cfg,
                                           std::vector<std::string> labels = {},
                                           TriangleScan scan = TriangleScan::Auto)
{
  if (labels.empty()) {
    for (std::size_t i = 0; i < items.size(); ++i)
      labels.push_back(items[i].source_id.empty() ? "q" + std::to_string(i) : items[i].source_id);
  }
  if (labels.size() != items.size())
    throw Error("pairwise_matrix: label count does not match item count");
  for (const auto& s : items)
    if (s.dim != items.front().dim)
      throw UnsupportedError("pairwise_matrix: samples have different dimensions");

  if (spec.kind == DissimilarityKind::L2 || spec.kind == DissimilarityKind::Hellinger) {
    std::vector<EstimatedDensity> kdes;
    kdes.reserve(items.size());
    for (const auto& s : items)
      kdes.emplace_back(s, cfg.kde);
    return detail::assemble(
      std::move(labels),
      [&](std::size_t i, std::size_t j) { return plugin_distance(kdes[i], kdes[j], spec); }, scan);
  }
  return detail::assemble(
    std::move(labels),
    [&](std::size_t i, std::size_t j) { return sample_dissimilarity(items[i], items[j], spec, cfg); },
    scan);
}

// ---------------------------------------------------------------------------
// SampleSet CSV

//! Line 1 `#source_id,dim,seed`, line 2 `#<id>,<dim>,<seed>`, then one
//! observation per line with `dim` comma-separated coordinates.
inline void write_sample_csv(std::ostream& os, const SampleSet& s)
{
  os << "#source_id,dim,seed\n";
  os << '#' << s.source_id << ',' << s.dim << ',' << s.seed << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto p = s.point(i);
    for (int j = 0; j < s.dim; ++j)
      os << (j ? "," : "") << format_double(p[j]);
    os << '\n';
  }
}

inline void write_sample_csv(const std::string& path, const SampleSet& s)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + path + "' for writing");
  write_sample_csv(os, s);
}

inline SampleSet read_sample_csv(std::istream& is)
{
  std::string line;
  auto next = [&](std::size_t& lineno) {
    if (!std::getline(is, line))
      return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    return true;
  };
  std::size_t lineno = 0;
  if (!next(lineno) || line != "#source_id,dim,seed")
    throw ParseError("sample CSV line 1: expected '#source_id,dim,seed'");
  if (!next(lineno) || line.empty() || line[0] != '#')
    throw ParseError("sample CSV line 2: expected '#<source_id>,<dim>,<seed>'");
  auto meta = split_csv_line(line.substr(1));
  if (meta.size() != 3)
    throw ParseError("sample CSV line 2: expected 3 fields");
  SampleSet s;
  s.source_id = meta[0];
  try {
    std::size_t pos = 0;
    long dim = std::stol(meta[1], &pos);
    if (pos != meta[1].size() || dim < 1)
      throw ParseError("");
    s.dim = static_cast<int>(dim);
    s.seed = std::stoull(meta[2], &pos);
    if (pos != meta[2].size())
      throw ParseError("");
  } catch (const std::exception&) {
    throw ParseError("sample CSV line 2: dim must be a positive integer and seed a nonnegative integer");
  }
  while (next(lineno)) {
    if (line.empty())
      continue;
    auto cells = split_csv_line(line);
    std::string where = "sample CSV line " + std::to_string(lineno);
    if (cells.size() != static_cast<std::size_t>(s.dim))
      throw ParseError(where + ": expected " + std::to_string(s.dim) + " coordinates, found " +
                       std::to_string(cells.size()));
    for (const auto& c : cells) {
      double v = parse_double(c, where);
      if (!std::isfinite(v))
        throw ParseError(where + ": observations must be finite");
      s.data.push_back(v);
    }
  }
  if (s.size() == 0)
    throw ParseError("sample CSV: no observations");
  return s;
}

inline SampleSet read_sample_csv(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot open '" + path + "'");
  return read_sample_csv(is);
}

} // namespace fmds
