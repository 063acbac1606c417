#pragma once

// Named desk-scale experiments with machine-checkable pass/fail results.

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "geometry.hpp"
#include "isomap.hpp"
#include "json_io.hpp"
#include "mds.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "testing/oracles.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace fmds {

struct Check
{
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string comparison; // "<=", ">=" or "=="
  bool pass = false;
  std::string note;
};

inline Check check_at_most(std::string name, double value, double tol, std::string note = {})
{
  return { std::move(name), value, tol, "<=", value <= tol, std::move(note) };
}

inline Check check_at_least(std::string name, double value, double tol, std::string note = {})
{
  return { std::move(name), value, tol, ">=", value >= tol, std::move(note) };
}

inline Check check_true(std::string name, bool ok, std::string note = {})
{
  return { std::move(name), ok ? 1.0 : 0.0, 1.0, "==", ok, std::move(note) };
}

struct SuiteResult
{
  std::string name;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  json details = json::object();
  double seconds = 0.0;
  double budget_seconds = 0.0;

  bool passed() const
  {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }

  //! First failing check, or the first check when all pass.
  const Check* headline() const
  {
    for (const auto& c : checks)
      if (!c.pass)
        return &c;
    return checks.empty() ? nullptr : &checks.front();
  }
};

inline json suite_json(const SuiteResult& r)
{
  json checks = json::array();
  for (const auto& c : r.checks) {
    json j = { { "name", c.name },
               { "value", number_json(c.value) },
               { "comparison", c.comparison },
               { "tolerance", number_json(c.tolerance) },
               { "pass", c.pass } };
    if (!c.note.empty())
      j["note"] = c.note;
    checks.push_back(j);
  }
  return { { "suite", r.name },           { "seed", r.seed },
           { "passed", r.passed() },      { "checks", checks },
           { "details", r.details },      { "budget_seconds", r.budget_seconds },
           { "wall_clock_seconds", r.seconds } };
}

namespace suites {

inline double rel_err(double a, double ref)
{
  if (a == ref)
    return 0.0;
  return std::abs(a - ref) / std::abs(ref);
}

inline double uniform(CounterRng& r, double lo, double hi) { return lo + (hi - lo) * r.next_open01(); }

inline Vector vec1(double x) { return Vector::Constant(1, x); }

inline DissimilarityMatrix from_values(const Matrix& v)
{
  DissimilarityMatrix m;
  m.labels = detail::default_labels(static_cast<std::size_t>(v.rows()));
  m.values = v;
  return m;
}

// ---------------------------------------------------------------------------
// closed-forms

inline SuiteResult closed_forms(std::uint64_t seed)
{
  SuiteResult res;
  CounterRng root = CounterRng(seed).split("closed-forms");
  struct Case
  {
    std::string name;
    DissimilarityKind kind;
    std::function<std::pair<Density, Density>(CounterRng&, std::size_t)> draw;
  };
  auto normal = make_normal_location(1);
  auto unif = make_uniform_location();
  std::vector<FamilySpec> gammas{ make_gamma_scale(0.5), make_gamma_scale(1.0),
                                  make_gamma_scale(2.0), make_gamma_scale(4.0) };
  auto nat = make_natural_normal();
  auto pois = make_poisson();
  std::vector<FamilySpec> ls{ make_location_scale(BaseShape::Normal),
                              make_location_scale(BaseShape::Logistic),
                              make_location_scale(BaseShape::Laplace) };
  auto warp = make_time_warp_power(WarpBase::Uniform);
  auto pair1 = [](const FamilySpec& f, double a, double b) {
    return std::pair{ Density(f, vec1(a)), Density(f, vec1(b)) };
  };
  std::vector<Case> cases{
    { "l2_normal", DissimilarityKind::L2,
      [&](CounterRng& r, std::size_t) { return pair1(normal, uniform(r, -3, 3), uniform(r, -3, 3)); } },
    { "l2_uniform", DissimilarityKind::L2,
      [&](CounterRng& r, std::size_t) { return pair1(unif, uniform(r, -1, 1), uniform(r, -1, 1)); } },
    { "l2_gamma_scale", DissimilarityKind::L2,
      [&](CounterRng& r, std::size_t i) {
        return pair1(gammas[i % gammas.size()], uniform(r, 0.3, 3), uniform(r, 0.3, 3));
      } },
    { "hellinger_normal", DissimilarityKind::Hellinger,
      [&](CounterRng& r, std::size_t) { return pair1(normal, uniform(r, -3, 3), uniform(r, -3, 3)); } },
    { "hellinger_expfam_normal", DissimilarityKind::Hellinger,
      [&](CounterRng& r, std::size_t) { return pair1(nat, uniform(r, -3, 3), uniform(r, -3, 3)); } },
    { "hellinger_expfam_poisson", DissimilarityKind::Hellinger,
      [&](CounterRng& r, std::size_t) { return pair1(pois, uniform(r, -2, 3), uniform(r, -2, 3)); } },
    { "symkl_expfam_normal", DissimilarityKind::SymKL,
      [&](CounterRng& r, std::size_t) { return pair1(nat, uniform(r, -3, 3), uniform(r, -3, 3)); } },
    { "symkl_expfam_poisson", DissimilarityKind::SymKL,
      [&](CounterRng& r, std::size_t) { return pair1(pois, uniform(r, -2, 3), uniform(r, -2, 3)); } },
    { "w2_location_scale", DissimilarityKind::Wasserstein2,
      [&](CounterRng& r, std::size_t i) {
        const auto& f = ls[i % ls.size()];
        Vector a(2), b(2);
        a << uniform(r, -3, 3), uniform(r, 0.3, 3);
        b << uniform(r, -3, 3), uniform(r, 0.3, 3);
        return std::pair{ Density(f, a), Density(f, b) };
      } },
    { "w2_time_warp", DissimilarityKind::Wasserstein2,
      [&](CounterRng& r, std::size_t) { return pair1(warp, uniform(r, 0.5, 2), uniform(r, 0.5, 2)); } },
  };

  const std::size_t pairs = 1000;
  const double tol = 1e-6;
  for (const auto& c : cases) {
    CounterRng cr = root.split(c.name);
    std::vector<double> err(pairs, 0.0);
    parallel_for(pairs, [&](std::size_t i) {
      CounterRng r = cr.split(static_cast<std::uint64_t>(i));
      auto [f, g] = c.draw(r, i);
      DissimilaritySpec closed{ c.kind, Evaluation::ClosedForm };
      DissimilaritySpec quad{ c.kind, Evaluation::Quadrature };
      err[i] = rel_err(squared_dissimilarity(f, g, quad), squared_dissimilarity(f, g, closed));
    });
    double worst = *std::max_element(err.begin(), err.end());
    res.details[c.name] = { { "pairs", pairs }, { "max_rel_error", worst } };
    res.checks.push_back(check_at_most(c.name + ".max_rel_error", worst, tol));
  }

  // The Gamma-scale bracket with (t + s) raised to +(2k+1) instead of
  // -(2k+1) is recorded for comparison; it does not match quadrature.
  {
    CounterRng r = root.split("gamma-exponent");
    double worst = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      double k = 1.0, t = uniform(r, 0.3, 3), s = uniform(r, 0.3, 3);
      Density f(gammas[1], vec1(t)), g(gammas[1], vec1(s));
      double q = squared_dissimilarity(f, g, DissimilaritySpec::l2(Evaluation::Quadrature));
      double alt = constants::l2_gamma_scale(k) *
                   (1 / t + 1 / s - std::pow(4.0, k + 1) * std::pow(t * s, k) * std::pow(t + s, 2 * k + 1));
      worst = std::max(worst, rel_err(alt, q));
    }
    res.details["l2_gamma_scale"]["positive_exponent_variant_max_rel_error"] = worst;
  }
  return res;
}

// ---------------------------------------------------------------------------
// pca-cs-equivalence

inline SuiteResult pca_cs_equivalence(std::uint64_t seed)
{
  SuiteResult res;
  CounterRng root = CounterRng(seed).split("pca-cs-equivalence");
  auto fam = make_normal_location(1);
  const std::size_t sets = 50, n = 8;
  const int d_e = 2;
  std::vector<double> resid(sets, 0.0);
  for (std::size_t s = 0; s < sets; ++s) {
    CounterRng r = root.split(static_cast<std::uint64_t>(s));
    std::vector<Density> qs;
    for (std::size_t i = 0; i < n; ++i)
      qs.emplace_back(fam, vec1(uniform(r, -2, 2)));
    // Gram route: centered inner products by quadrature.
    Embedding gram = spectral_embedding(gram_from_densities(qs, Evaluation::Quadrature), d_e,
                                        detail::default_labels(n));
    // Distance route: closed-form distances, double centering.
    Embedding dist = classical_scaling(pairwise_matrix(qs, DissimilaritySpec::l2()), d_e);
    resid[s] = procrustes_residual(gram.coords, dist.coords);
  }
  double worst = *std::max_element(resid.begin(), resid.end());
  res.details = { { "sets", sets }, { "densities_per_set", n }, { "dim", d_e },
                  { "max_procrustes_residual", worst } };
  res.checks.push_back(check_at_most("max_procrustes_residual", worst, 1e-8));
  return res;
}

// ---------------------------------------------------------------------------
// cs-exactness

inline SuiteResult cs_exactness(std::uint64_t)
{
  SuiteResult res;
  auto fam = make_normal_location(1);
  const std::size_t n = 100;
  std::vector<Density> qs;
  Matrix truth(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    truth(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
    qs.emplace_back(fam, vec1(truth(i, 0)));
  }
  auto d = pairwise_matrix(qs, DissimilaritySpec::w2(), {}, TriangleScan::Never);
  Embedding e = classical_scaling(d, 1);
  double st = stress(d, e.coords);
  double pr = procrustes_residual(e.coords, truth);
  res.details = { { "n", n }, { "stress", st }, { "procrustes_residual", pr } };
  res.checks.push_back(check_at_most("stress", st, 1e-10));
  res.checks.push_back(check_at_most("procrustes_residual", pr, 1e-8));
  return res;
}

// ---------------------------------------------------------------------------
// isomap-consistency

inline SuiteResult isomap_consistency(std::uint64_t)
{
  SuiteResult res;
  auto fam = make_normal_location(1);
  // Hellinger^2 expands to (1/4) theta' I theta, so the intrinsic metric is
  // the Fisher-Rao metric scaled by 1/4.
  MetricTensorField field = fisher_field(fam).scaled(0.25);
  const std::vector<std::pair<std::size_t, double>> settings{ { 100, 0.12 }, { 300, 0.07 }, { 1000, 0.04 } };
  std::vector<double> worst;
  json rows = json::array();
  for (auto [n, r] : settings) {
    std::vector<Density> qs;
    for (std::size_t i = 0; i < n; ++i)
      qs.emplace_back(fam, vec1(static_cast<double>(i) / static_cast<double>(n - 1)));
    auto d = pairwise_matrix(qs, DissimilaritySpec::hellinger(), {}, TriangleScan::Never);
    auto g = build_graph(d, r);
    if (!g.connected())
      throw Error("isomap-consistency: graph disconnected at n=" + std::to_string(n));
    auto geo = shortest_paths(g);
    // The Fisher tensor of a location family does not depend on theta, so
    // the lattice distance depends only on the grid offset.
    std::vector<double> ref(n, 0.0);
    parallel_for(n - 1, [&](std::size_t k) {
      ref[k + 1] = intrinsic_distance(vec1(0.0), vec1(static_cast<double>(k + 1) / static_cast<double>(n - 1)),
                                      field, fam);
    });
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        w = std::max(w, rel_err(geo.values(i, j), ref[j - i]));
    worst.push_back(w);
    rows.push_back({ { "n", n }, { "radius", r }, { "max_rel_error", w },
                     { "max_degree", g.max_degree() } });
  }
  bool decreasing = true;
  for (std::size_t k = 1; k < worst.size(); ++k)
    decreasing = decreasing && worst[k] < worst[k - 1];
  res.details = { { "settings", rows } };
  res.checks.push_back(check_true("max_rel_error_decreasing", decreasing));
  res.checks.push_back(check_at_most("final_max_rel_error", worst.back(), 0.03));
  return res;
}

// ---------------------------------------------------------------------------
// uniform-blowup

inline SuiteResult uniform_blowup(std::uint64_t)
{
  SuiteResult res;
  auto fam = make_uniform_location();
  const std::size_t n = 2000;
  std::vector<Density> qs;
  for (std::size_t i = 0; i < n; ++i)
    qs.emplace_back(fam, vec1(static_cast<double>(i) / static_cast<double>(n - 1)));
  auto d = pairwise_matrix(qs, DissimilaritySpec::l2(), {}, TriangleScan::Never);
  const std::vector<double> radii{ 0.08, 0.04, 0.02 };
  std::vector<double> dist;
  json rows = json::array();
  for (double r : radii) {
    auto g = build_graph(d, r);
    double v = single_source_paths(g, 0)[n - 1];
    dist.push_back(v);
    json row = { { "radius", r }, { "geodesic_0_1", number_json(v) },
                 { "components", g.component_count }, { "edges", g.edge_count() } };
    if (!g.connected())
      row["note"] = "graph disconnected: no path within radius, geodesic distance is +inf";
    rows.push_back(row);
  }
  res.details = { { "n", n }, { "settings", rows } };
  for (std::size_t k = 1; k < dist.size(); ++k) {
    double ratio = dist[k] / dist[k - 1];
    std::string note = std::isinf(dist[k]) ? "r=" + format_double(radii[k]) +
                                               " disconnects the grid; the ratio is infinite"
                                           : "";
    res.checks.push_back(check_at_least("ratio_r" + format_double(radii[k - 1]) + "_to_r" +
                                          format_double(radii[k]),
                                        ratio, 1.2, note));
  }
  return res;
}

// ---------------------------------------------------------------------------
// timewarp-convergence

inline SuiteResult timewarp_convergence(std::uint64_t seed)
{
  SuiteResult res;
  CounterRng r = CounterRng(seed).split("timewarp-convergence");
  auto fam = make_time_warp_power(WarpBase::Uniform);
  const std::size_t n = 200;
  std::vector<Density> qs;
  for (std::size_t i = 0; i < n; ++i)
    qs.emplace_back(fam, vec1(uniform(r, 0.5, 2.0)));
  auto d = pairwise_matrix(qs, DissimilaritySpec::w2(), {}, TriangleScan::Never);
  const std::vector<int> dims{ 1, 2, 5, 10, 20 };
  std::vector<double> worst;
  double min_gap = inf;
  json rows = json::array();
  for (int k : dims) {
    Embedding e = classical_scaling(d, k);
    double w = 0.0, gap = inf;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double cs2 = (e.coords.row(i) - e.coords.row(j)).squaredNorm();
        double dw = d.values(i, j);
        w = std::max(w, std::abs(std::sqrt(cs2) - dw));
        gap = std::min(gap, dw * dw - cs2);
      }
    worst.push_back(w);
    min_gap = std::min(min_gap, gap);
    rows.push_back({ { "dim", k }, { "max_abs_error", w }, { "min_squared_gap", gap } });
  }
  bool nonincreasing = true;
  for (std::size_t k = 1; k < worst.size(); ++k)
    nonincreasing = nonincreasing && worst[k] <= worst[k - 1];
  res.details = { { "n", n }, { "settings", rows } };
  res.checks.push_back(check_true("max_error_nonincreasing", nonincreasing));
  res.checks.push_back(check_at_least("min_squared_gap", min_gap, -1e-10));
  return res;
}

// ---------------------------------------------------------------------------
// sample-consistency

inline SuiteResult sample_consistency(std::uint64_t seed)
{
  SuiteResult res;
  CounterRng root = CounterRng(seed).split("sample-consistency");
  auto fam = make_normal_location(1);
  Density f(fam, vec1(0.0)), g(fam, vec1(2.0));
  const std::size_t seeds = 20, m = 10000, needed = 18;
  const KernelSpec mmd_kernel = KernelSpec::gaussian(1.0);
  const double w2_ref = 2.0;
  const double l2_ref = l2_distance(f, g, Evaluation::ClosedForm);
  const double h_ref = hellinger_distance(f, g, Evaluation::ClosedForm);
  const double mmd_ref = std::pow(rkhs_distance(f, g, mmd_kernel, Evaluation::Quadrature), 2);
  const KdeConfig kde = KdeConfig::silverman();

  std::size_t ok_w2 = 0, ok_l2 = 0, ok_h = 0, ok_mmd = 0;
  json rows = json::array();
  for (std::size_t s = 0; s < seeds; ++s) {
    CounterRng r = root.split(static_cast<std::uint64_t>(s));
    SampleSet a = sample(f, m, r.split("f").next_u64(), "f");
    SampleSet b = sample(g, m, r.split("g").next_u64(), "g");
    double w2 = empirical_w2_1d(a, b);
    double l2 = plugin_distance(a, b, DissimilaritySpec::l2(), kde);
    double h = plugin_distance(a, b, DissimilaritySpec::hellinger(), kde);
    double mmd = mmd_ustat(a, b, mmd_kernel);
    ok_w2 += rel_err(w2, w2_ref) <= 0.05;
    ok_l2 += rel_err(l2, l2_ref) <= 0.10;
    ok_h += rel_err(h, h_ref) <= 0.10;
    ok_mmd += rel_err(mmd, mmd_ref) <= 0.05;
    rows.push_back({ { "w2", w2 }, { "l2_plugin", l2 }, { "hellinger_plugin", h }, { "mmd2", mmd } });
  }
  res.details = { { "m", m },
                  { "references",
                    { { "w2", w2_ref }, { "l2", l2_ref }, { "hellinger", h_ref }, { "mmd2", mmd_ref } } },
                  { "per_seed", rows } };
  auto add = [&](const char* name, std::size_t ok, const char* tol) {
    res.checks.push_back(check_at_least(name, static_cast<double>(ok), static_cast<double>(needed),
                                        std::string("seeds within ") + tol + " of the reference, of " +
                                          std::to_string(seeds)));
  };
  add("w2_within_5pct", ok_w2, "5%");
  add("l2_plugin_within_10pct", ok_l2, "10%");
  add("hellinger_plugin_within_10pct", ok_h, "10%");
  add("mmd_within_5pct", ok_mmd, "5%");
  return res;
}

// ---------------------------------------------------------------------------
// tensor-probes

inline SuiteResult tensor_probes(std::uint64_t)
{
  SuiteResult res;
  auto rel_matrix = [](const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); };
  json rows = json::array();
  auto hellinger_case = [&](const std::string& name, const FamilySpec& fam,
                            const std::vector<double>& points) {
    double worst = 0.0;
    for (double t : points) {
      Vector t0 = vec1(t);
      ProbeResult p = intrinsic_ratio_probe(DissimilaritySpec::hellinger(), fam, t0);
      double e = rel_matrix(p.tensor, 0.25 * fisher_information(fam, t0));
      worst = std::max(worst, e);
      rows.push_back({ { "case", name }, { "theta0", t }, { "rel_error", e } });
    }
    res.checks.push_back(check_at_most(name + ".max_rel_error", worst, 1e-3));
  };
  hellinger_case("hellinger_vs_quarter_fisher.normal", make_natural_normal(), { -1.0, 0.5, 2.0 });
  hellinger_case("hellinger_vs_quarter_fisher.poisson", make_poisson(), { -1.0, 0.0, 1.5 });

  {
    double worst = 0.0;
    for (int dim : { 1, 2 }) {
      auto fam = make_normal_location(dim);
      Vector t0 = Vector::LinSpaced(dim, 0.3, -0.4);
      ProbeResult p = intrinsic_ratio_probe(DissimilaritySpec::l2(), fam, t0);
      double e = rel_matrix(p.tensor, l2_information(fam, t0));
      worst = std::max(worst, e);
      rows.push_back({ { "case", "l2_normal_location" }, { "dim", dim }, { "rel_error", e } });
    }
    res.checks.push_back(check_at_most("l2_vs_l2_information.normal.max_rel_error", worst, 1e-3));
  }
  {
    double worst = 0.0;
    for (const auto& [name, fam] : std::vector<std::pair<std::string, FamilySpec>>{
           { "normal_location", make_normal_location(1) }, { "uniform_location", make_uniform_location() } }) {
      ProbeResult p = intrinsic_ratio_probe(DissimilaritySpec::w2(), fam, vec1(0.3));
      double e = std::abs(p.tensor(0, 0) - 1.0);
      worst = std::max(worst, e);
      rows.push_back({ { "case", "w2_" + name }, { "tensor", p.tensor(0, 0) }, { "abs_error", e } });
    }
    res.checks.push_back(check_at_most("w2_location.max_abs_error", worst, 1e-6));
  }
  {
    // L2 on the uniform location family grows like |h|, not h^2.
    ProbeResult p = intrinsic_ratio_probe(DissimilaritySpec::l2(), make_uniform_location(), vec1(0.3));
    rows.push_back({ { "case", "l2_uniform" }, { "exponent", p.exponent },
                     { "mismatch_flagged", p.exponent_mismatch } });
    res.checks.push_back(check_true("l2_uniform.nonquadratic_flagged", p.exponent_mismatch));
  }
  res.details = { { "probes", rows } };
  return res;
}

// ---------------------------------------------------------------------------
// oracle-equivalences

inline SuiteResult oracle_equivalences(std::uint64_t seed)
{
  SuiteResult res;
  CounterRng root = CounterRng(seed).split("oracle-equivalences");

  // Integer weights keep every path sum exact, so equality is exact.
  std::size_t mismatches = 0, finite = 0;
  {
    CounterRng r = root.split("graphs");
    const std::size_t graphs = 20, n = 50;
    for (std::size_t k = 0; k < graphs; ++k) {
      Matrix v = Matrix::Zero(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          v(i, j) = v(j, i) = std::floor(uniform(r, 1.0, 101.0));
      auto g = build_graph(from_values(v), 12.0);
      Matrix fw = oracle::floyd_warshall(g);
      auto sp = shortest_paths(g);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          mismatches += sp.values(i, j) != fw(i, j);
          finite += std::isfinite(fw(i, j));
        }
    }
    res.details["shortest_paths"] = { { "graphs", graphs }, { "n", n }, { "finite_entries", finite },
                                      { "mismatches", mismatches } };
    res.checks.push_back(check_at_most("shortest_paths_mismatches", static_cast<double>(mismatches), 0.0));
  }

  // Unequal sizes are compared by replicating points up to a common size.
  // Enumeration covers common sizes up to 8, the Hungarian method the rest
  // (up to 20); both are checked against each other where they overlap.
  {
    CounterRng r = root.split("w2");
    double worst = 0.0, worst_cross = 0.0;
    std::size_t compared = 0;
    for (std::size_t ma = 1; ma <= 5; ++ma)
      for (std::size_t mb = 1; mb <= 5; ++mb) {
        std::size_t l = std::lcm(ma, mb);
        for (int rep = 0; rep < 20; ++rep) {
          SampleSet a, b;
          a.dim = b.dim = 1;
          bool ties = rep % 4 == 0;
          for (std::size_t i = 0; i < ma; ++i)
            a.data.push_back(ties ? std::floor(uniform(r, 0, 3)) : uniform(r, -2, 2));
          for (std::size_t i = 0; i < mb; ++i)
            b.data.push_back(ties ? std::floor(uniform(r, 0, 3)) : uniform(r, -1, 3));
          std::vector<double> xa, xb;
          for (double x : a.data)
            xa.insert(xa.end(), l / ma, x);
          for (double x : b.data)
            xb.insert(xb.end(), l / mb, x);
          double want = oracle::hungarian_w2(xa, xb);
          if (l <= 8) {
            double e = oracle::assignment_w2(xa, xb);
            worst_cross = std::max(worst_cross, e == 0 ? std::abs(want) : rel_err(want, e));
          }
          double got = empirical_w2_1d(a, b);
          worst = std::max(worst, want == 0 ? std::abs(got) : rel_err(got, want));
          ++compared;
        }
      }
    res.details["empirical_w2"] = { { "pairs", compared },
                                    { "max_rel_error", worst },
                                    { "hungarian_vs_enumeration", worst_cross } };
    res.checks.push_back(check_at_most("empirical_w2_vs_assignment", worst, 1e-12));
    res.checks.push_back(check_at_most("hungarian_vs_enumeration", worst_cross, 1e-12));
  }

  // Classical scaling against random configurations of the same rank.
  {
    CounterRng r = root.split("strain");
    const int instances = 10, trials = 100, rank = 2;
    const Eigen::Index n = 15;
    double worst_margin = inf, worst_ey = 0.0;
    for (int k = 0; k < instances; ++k) {
      DissimilarityMatrix d;
      if (k % 2 == 0) {
        auto fam = make_normal_location(2);
        std::vector<Density> qs;
        for (Eigen::Index i = 0; i < n; ++i) {
          Vector t(2);
          t << uniform(r, -3, 3), uniform(r, -3, 3);
          qs.emplace_back(fam, t);
        }
        d = pairwise_matrix(qs, DissimilaritySpec::hellinger());
      } else {
        d = oracle::euclidean_matrix(oracle::gaussian_points(r, n, 4));
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = i + 1; j < n; ++j)
            d.values(i, j) = d.values(j, i) = d.values(i, j) * uniform(r, 0.7, 1.3);
      }
      Matrix b = double_center(d);
      Embedding e = classical_scaling(d, rank);
      double cs = strain(b, e.coords);
      worst_ey = std::max(worst_ey, rel_err(cs, oracle::eckart_young_strain(b, rank)));
      double scale = std::sqrt(std::max(e.eigenvalues[0], 1e-12) / static_cast<double>(n));
      for (int t = 0; t < trials; ++t) {
        Matrix x = oracle::gaussian_points(r, n, rank);
        Matrix y = t % 2 ? Matrix(e.coords + 0.05 * scale * x) : Matrix(scale * x);
        worst_margin = std::min(worst_margin, strain(b, y) - cs);
      }
    }
    res.details["strain"] = { { "instances", instances }, { "trials", trials },
                              { "min_margin", worst_margin },
                              { "eckart_young_max_rel_error", worst_ey } };
    res.checks.push_back(check_at_least("strain_margin_over_random", worst_margin, 0.0));
    res.checks.push_back(check_at_most("strain_vs_eckart_young", worst_ey, 1e-9));
  }
  return res;
}

// ---------------------------------------------------------------------------
// schoenberg

inline SuiteResult schoenberg(std::uint64_t seed)
{
  SuiteResult res;
  CounterRng r = CounterRng(seed).split("schoenberg");
  bool all_psd = true;
  long max_rank = 0;
  double worst_ratio = inf;
  for (int k = 0; k < 10; ++k) {
    auto d = oracle::euclidean_matrix(oracle::gaussian_points(r, 20, 3));
    SchoenbergResult s = schoenberg_check(d);
    all_psd = all_psd && s.is_hilbertian;
    max_rank = std::max<long>(max_rank, static_cast<long>(s.numerical_rank));
    worst_ratio = std::min(worst_ratio, s.min_eigenvalue / s.spectral_norm);
  }
  Matrix sq = Matrix::Ones(4, 4);
  sq.diagonal().setZero();
  sq(0, 2) = sq(2, 0) = sq(1, 3) = sq(3, 1) = 1.9;
  SchoenbergResult c = schoenberg_check(from_values(sq));
  res.details = { { "configurations", 10 },
                  { "min_eigenvalue_over_norm", worst_ratio },
                  { "max_numerical_rank", max_rank },
                  { "counterexample_min_eigenvalue", c.min_eigenvalue } };
  res.checks.push_back(check_at_least("min_eigenvalue_over_norm", worst_ratio, -1e-8));
  res.checks.push_back(check_at_most("max_numerical_rank", static_cast<double>(max_rank), 3.0));
  res.checks.push_back(check_true("counterexample_flagged", !c.is_hilbertian));
  return res;
}

} // namespace suites

struct SuiteInfo
{
  std::string name;
  std::string description;
  double budget_seconds;
  std::function<SuiteResult(std::uint64_t)> run;
};

inline const std::vector<SuiteInfo>& suite_registry()
{
  static const std::vector<SuiteInfo> r{
    { "closed-forms", "closed forms against quadrature, 1000 random pairs per case", 30,
      suites::closed_forms },
    { "pca-cs-equivalence", "Gram route against distance route on 8 normal densities", 10,
      suites::pca_cs_equivalence },
    { "cs-exactness", "W2 on a normal location grid embeds exactly in one dimension", 5,
      suites::cs_exactness },
    { "isomap-consistency", "Isomap geodesics on a Hellinger grid against the Fisher lattice", 120,
      suites::isomap_consistency },
    { "uniform-blowup", "L2 uniform-location geodesics grow as the radius shrinks", 60,
      suites::uniform_blowup },
    { "timewarp-convergence", "CS of power-warp W2 converges as the dimension grows", 60,
      suites::timewarp_convergence },
    { "sample-consistency", "sample estimators against population values, 20 seeds", 120,
      suites::sample_consistency },
    { "tensor-probes", "ratio probes against information tensors", 30, suites::tensor_probes },
    { "oracle-equivalences", "shortest paths, empirical W2 and strain against brute force", 60,
      suites::oracle_equivalences },
    { "schoenberg", "Euclidean configurations are PSD, a stretched square is not", 5,
      suites::schoenberg },
  };
  return r;
}

inline const SuiteInfo& find_suite(const std::string& name)
{
  std::string names;
  for (const auto& s : suite_registry()) {
    if (s.name == name)
      return s;
    names += (names.empty() ? "" : ", ") + s.name;
  }
  throw SpecError("unknown suite '" + name + "'; available: " + names);
}

//! Runs one suite and, when `out_dir` is non-empty, writes
//! <out_dir>/<name>/result.json. Exceeding the time budget is a failed check.
inline SuiteResult run_suite(const std::string& name, std::uint64_t seed, const std::string& out_dir = {})
{
  const SuiteInfo& info = find_suite(name);
  auto t0 = std::chrono::steady_clock::now();
  SuiteResult r;
  try {
    r = info.run(seed);
  } catch (const Error& e) {
    r.checks.push_back({ "completed", 0.0, 1.0, "==", false, e.what() });
  }
  r.name = info.name;
  r.seed = seed;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.budget_seconds = info.budget_seconds;
  r.checks.push_back(check_at_most("runtime_seconds", r.seconds, info.budget_seconds));
  if (!out_dir.empty()) {
    auto dir = std::filesystem::path(out_dir) / info.name;
    std::filesystem::create_directories(dir);
    write_json((dir / "result.json").string(), suite_json(r));
  }
  return r;
}

} // namespace fmds
