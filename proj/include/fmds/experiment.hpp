#pragma once

#include "dissimilarity_matrix.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "geometry.hpp"
#include "isomap.hpp"
#include "json_io.hpp"
#include "mds.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "rng.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#ifndef FMDS_VERSION
#define FMDS_VERSION "0.0.0"
#endif

namespace fmds {

enum class SettingMode
{
  Population,
  Sample
};

enum class MethodKind
{
  CS,
  Isomap
};

struct MethodSpec
{
  MethodKind kind = MethodKind::CS;
  int dim = 2;
  std::optional<double> radius;   // Isomap radius graph
  std::optional<std::size_t> knn; // Isomap k-NN graph
  DisconnectionPolicy policy = DisconnectionPolicy::Error;
};

//! Reference values for a per-pair error table.
//!  - Population: the population dissimilarity of the generating parameters
//!    (meaningful in sample mode).
//!  - Intrinsic: lattice Riemannian distance under scale * A(theta) for the
//!    chosen information tensor (meaningful for Isomap geodesics).
struct OracleSpec
{
  enum class Kind
  {
    None,
    Population,
    Intrinsic
  };
  Kind kind = Kind::None;
  TensorKind tensor = TensorKind::Fisher;
  double scale = 1.0;
  std::size_t cells = 400;
};

struct ExperimentConfig
{
  FamilySpec family;
  std::vector<Vector> parameters;
  std::vector<std::string> labels;
  DissimilaritySpec metric;
  SettingMode mode = SettingMode::Population;
  std::size_t sample_size = 0;
  EstimatorConfig estimator;
  bool write_samples = false;
  std::optional<MethodSpec> method;
  OracleSpec oracle;
  bool covering_radius_report = false;
  std::size_t covering_reference = 200;
  std::string outputs = "fmds-out";
  std::uint64_t seed = 0;
  json source;
};

namespace detail {

inline std::vector<double> number_list(const json& j, std::size_t p, const std::string& path)
{
  if (j.is_number() && p == 1)
    return { get_number(j, path) };
  if (!j.is_array() || j.size() != p)
    throw ValidationError(path, "expected an array of " + std::to_string(p) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < p; ++i)
    out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string format_label(const Vector& t)
{
  std::string s = "t";
  for (Eigen::Index i = 0; i < t.size(); ++i)
    s += (i ? "_" : "") + format_double(t[i]);
  return s;
}

inline DissimilaritySpec parse_metric(const json& j, const std::string& path)
{
  check_keys(j, { "kind", "evaluation", "kernel" }, path);
  std::string kind = get_string(field(j, "kind", path), path + ".kind");
  Evaluation ev = Evaluation::Auto;
  if (j.contains("evaluation")) {
    std::string e = get_string(j["evaluation"], path + ".evaluation");
    if (e == "auto")
      ev = Evaluation::Auto;
    else if (e == "closed_form")
      ev = Evaluation::ClosedForm;
    else if (e == "quadrature")
      ev = Evaluation::Quadrature;
    else
      throw ValidationError(path + ".evaluation", "expected auto, closed_form or quadrature");
  }
  auto kernel = [&]() {
    const std::string kp = path + ".kernel";
    const json& k = field(j, "kernel", path);
    check_keys(k, { "form", "bandwidth" }, kp);
    std::string form = k.contains("form") ? get_string(k["form"], kp + ".form") : "gaussian";
    double b = get_number(field(k, "bandwidth", kp), kp + ".bandwidth");
    if (!(b > 0) || !std::isfinite(b))
      throw ValidationError(kp + ".bandwidth", "must be positive and finite");
    if (form == "gaussian")
      return KernelSpec::gaussian(b);
    if (form == "triweight_convolution")
      return KernelSpec::triweight(b);
    throw ValidationError(kp + ".form", "expected gaussian or triweight_convolution");
  };
  if (kind != "rkhs" && j.contains("kernel"))
    throw ValidationError(path + ".kernel", "only the rkhs metric takes a kernel");
  if (kind == "l2")
    return DissimilaritySpec::l2(ev);
  if (kind == "rkhs")
    return DissimilaritySpec::rkhs(kernel(), ev);
  if (kind == "hellinger")
    return DissimilaritySpec::hellinger(ev);
  if (kind == "symkl")
    return DissimilaritySpec::symkl(ev);
  if (kind == "chisq")
    return DissimilaritySpec::chisq(ev);
  if (kind == "total_variation")
    return DissimilaritySpec::fdiv(Psi::total_variation());
  if (kind == "w2")
    return DissimilaritySpec::w2(ev);
  throw ValidationError(path + ".kind",
                        "expected l2, rkhs, hellinger, symkl, chisq, total_variation or w2");
}

inline std::vector<Vector> parse_parameters(const json& model, const FamilySpec& fam,
                                            CounterRng rng, const std::string& path)
{
  const std::size_t p = fam.parameter_space.dim();
  int sources = model.contains("grid") + model.contains("points") + model.contains("random");
  if (sources != 1)
    throw ValidationError(path, "exactly one of grid, points, random is required");
  std::vector<Vector> out;
  if (model.contains("points")) {
    const json& pts = model["points"];
    const std::string pp = path + ".points";
    if (!pts.is_array())
      throw ValidationError(pp, "expected an array");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto v = number_list(pts[i], p, pp + "[" + std::to_string(i) + "]");
      out.push_back(Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(p)));
    }
  } else if (model.contains("grid")) {
    const json& g = model["grid"];
    const std::string gp = path + ".grid";
    check_keys(g, { "from", "to", "count" }, gp);
    auto from = number_list(field(g, "from", gp), p, gp + ".from");
    auto to = number_list(field(g, "to", gp), p, gp + ".to");
    const json& cj = field(g, "count", gp);
    std::vector<long> count;
    if (cj.is_number_integer())
      count.assign(p, get_integer(cj, gp + ".count"));
    else if (cj.is_array() && cj.size() == p)
      for (std::size_t i = 0; i < p; ++i)
        count.push_back(get_integer(cj[i], gp + ".count[" + std::to_string(i) + "]"));
    else
      throw ValidationError(gp + ".count", "expected an integer or one integer per coordinate");
    std::size_t total = 1;
    for (long c : count) {
      if (c < 1)
        throw ValidationError(gp + ".count", "counts must be >= 1");
      total *= static_cast<std::size_t>(c);
    }
    if (total > 100000)
      throw ValidationError(gp + ".count", "grid has more than 100000 points");
    for (std::size_t id = 0; id < total; ++id) {
      Vector t(p);
      std::size_t rest = id;
      for (std::size_t j = 0; j < p; ++j) {
        long k = static_cast<long>(rest % count[j]);
        rest /= count[j];
        t[j] = count[j] == 1 ? from[j] : from[j] + (to[j] - from[j]) * k / (count[j] - 1);
      }
      out.push_back(t);
    }
  } else {
    const json& r = model["random"];
    const std::string rp = path + ".random";
    check_keys(r, { "count", "lo", "hi" }, rp);
    long n = get_integer(field(r, "count", rp), rp + ".count");
    if (n < 1)
      throw ValidationError(rp + ".count", "must be >= 1");
    auto lo = number_list(field(r, "lo", rp), p, rp + ".lo");
    auto hi = number_list(field(r, "hi", rp), p, rp + ".hi");
    for (std::size_t j = 0; j < p; ++j)
      if (!(lo[j] <= hi[j]) || !std::isfinite(lo[j]) || !std::isfinite(hi[j]))
        throw ValidationError(rp, "lo and hi must be finite with lo <= hi");
    CounterRng draw = rng.split("parameters");
    for (long i = 0; i < n; ++i) {
      Vector t(p);
      for (std::size_t j = 0; j < p; ++j)
        t[j] = lo[j] + (hi[j] - lo[j]) * draw.next_open01();
      out.push_back(t);
    }
  }
  if (out.empty())
    throw ValidationError(path, "the parameter set is empty");
  for (std::size_t i = 0; i < out.size(); ++i) {
    try {
      Density(fam, out[i]);
    } catch (const DomainError& e) {
      throw ValidationError(path + " item " + std::to_string(i), e.what());
    }
  }
  return out;
}

inline MethodSpec parse_method(const json& j, const std::string& path)
{
  check_keys(j, { "kind", "dim", "radius", "knn", "largest_component" }, path);
  MethodSpec m;
  std::string kind = get_string(field(j, "kind", path), path + ".kind");
  if (kind == "cs")
    m.kind = MethodKind::CS;
  else if (kind == "isomap")
    m.kind = MethodKind::Isomap;
  else
    throw ValidationError(path + ".kind", "expected cs or isomap");
  long dim = get_integer(field(j, "dim", path), path + ".dim");
  if (dim < 1)
    throw ValidationError(path + ".dim", "must be >= 1");
  m.dim = static_cast<int>(dim);
  if (m.kind == MethodKind::CS) {
    for (const char* k : { "radius", "knn", "largest_component" })
      if (j.contains(k))
        throw ValidationError(path + "." + k, "only isomap takes this field");
    return m;
  }
  if (j.contains("radius") == j.contains("knn"))
    throw ValidationError(path, "isomap needs exactly one of radius, knn");
  if (j.contains("radius")) {
    double r = get_number(j["radius"], path + ".radius");
    if (!(r > 0) || !std::isfinite(r))
      throw ValidationError(path + ".radius", "must be positive and finite");
    m.radius = r;
  } else {
    long k = get_integer(j["knn"], path + ".knn");
    if (k < 1)
      throw ValidationError(path + ".knn", "must be >= 1");
    m.knn = static_cast<std::size_t>(k);
  }
  if (j.contains("largest_component")) {
    if (!j["largest_component"].is_boolean())
      throw ValidationError(path + ".largest_component", "expected a boolean");
    if (j["largest_component"].get<bool>())
      m.policy = DisconnectionPolicy::LargestComponent;
  }
  return m;
}

inline OracleSpec parse_oracle(const json& j, const std::string& path)
{
  check_keys(j, { "kind", "tensor", "scale", "cells" }, path);
  OracleSpec o;
  std::string kind = get_string(field(j, "kind", path), path + ".kind");
  if (kind == "none")
    return o;
  if (kind == "population") {
    o.kind = OracleSpec::Kind::Population;
    return o;
  }
  if (kind != "intrinsic")
    throw ValidationError(path + ".kind", "expected none, population or intrinsic");
  o.kind = OracleSpec::Kind::Intrinsic;
  std::string t = get_string(field(j, "tensor", path), path + ".tensor");
  if (t == "fisher")
    o.tensor = TensorKind::Fisher;
  else if (t == "l2")
    o.tensor = TensorKind::L2Info;
  else if (t == "wasserstein")
    o.tensor = TensorKind::WassersteinInfo1D;
  else
    throw ValidationError(path + ".tensor", "expected fisher, l2 or wasserstein");
  o.scale = number_or(j, "scale", 1.0, path);
  if (!(o.scale > 0) || !std::isfinite(o.scale))
    throw ValidationError(path + ".scale", "must be positive and finite");
  if (j.contains("cells")) {
    long c = get_integer(j["cells"], path + ".cells");
    if (c < 2)
      throw ValidationError(path + ".cells", "must be >= 2");
    o.cells = static_cast<std::size_t>(c);
  }
  return o;
}

} // namespace detail

//! Validates a configuration document; errors carry the offending field path.
inline ExperimentConfig parse_config(const json& j)
{
  detail::check_keys(j,
                     { "seed", "model", "metric", "mode", "method", "outputs", "oracle",
                       "covering_radius_report", "covering_reference" },
                     "config");
  ExperimentConfig c;
  c.source = j;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw ValidationError("config.seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  const json& model = detail::field(j, "model", "config");
  detail::check_keys(model, { "family", "grid", "points", "random" }, "config.model");
  c.family = family_from_json(detail::field(model, "family", "config.model"), "config.model.family");
  c.parameters = detail::parse_parameters(model, c.family, CounterRng(c.seed), "config.model");
  for (const auto& t : c.parameters)
    c.labels.push_back(detail::format_label(t));
  c.metric = detail::parse_metric(detail::field(j, "metric", "config"), "config.metric");

  if (j.contains("mode")) {
    const json& m = j["mode"];
    detail::check_keys(m, { "kind", "m", "kde", "write_samples" }, "config.mode");
    std::string kind = detail::get_string(detail::field(m, "kind", "config.mode"), "config.mode.kind");
    if (kind == "population") {
      for (const char* k : { "m", "kde", "write_samples" })
        if (m.contains(k))
          throw ValidationError(std::string("config.mode.") + k, "only sample mode takes this field");
    } else if (kind == "sample") {
      c.mode = SettingMode::Sample;
      long size = detail::get_integer(detail::field(m, "m", "config.mode"), "config.mode.m");
      if (size < 1)
        throw ValidationError("config.mode.m", "sample size must be >= 1");
      c.sample_size = static_cast<std::size_t>(size);
      if (m.contains("kde")) {
        const json& k = m["kde"];
        detail::check_keys(k, { "rule", "form", "bandwidth" }, "config.mode.kde");
        std::string rule = k.contains("rule") ? detail::get_string(k["rule"], "config.mode.kde.rule")
                                              : "silverman";
        std::string form = k.contains("form") ? detail::get_string(k["form"], "config.mode.kde.form")
                                              : "gaussian";
        KernelSpec::Form f;
        if (form == "gaussian")
          f = KernelSpec::Form::Gaussian;
        else if (form == "triweight_convolution")
          f = KernelSpec::Form::TriweightConvolution;
        else
          throw ValidationError("config.mode.kde.form", "expected gaussian or triweight_convolution");
        if (rule == "silverman") {
          if (k.contains("bandwidth"))
            throw ValidationError("config.mode.kde.bandwidth", "silverman picks the bandwidth");
          c.estimator.kde = KdeConfig::silverman(f);
        } else if (rule == "fixed") {
          double b = detail::get_number(detail::field(k, "bandwidth", "config.mode.kde"),
                                        "config.mode.kde.bandwidth");
          if (!(b > 0) || !std::isfinite(b))
            throw ValidationError("config.mode.kde.bandwidth", "must be positive and finite");
          c.estimator.kde = KdeConfig::fixed(KernelSpec{ f, b });
        } else {
          throw ValidationError("config.mode.kde.rule", "expected silverman or fixed");
        }
      }
      if (m.contains("write_samples")) {
        if (!m["write_samples"].is_boolean())
          throw ValidationError("config.mode.write_samples", "expected a boolean");
        c.write_samples = m["write_samples"].get<bool>();
      }
      if (c.family.data_dim() != 1)
        throw ValidationError("config.mode", "sample mode supports one-dimensional families only");
    } else {
      throw ValidationError("config.mode.kind", "expected population or sample");
    }
  }
  if (j.contains("method")) {
    c.method = detail::parse_method(j["method"], "config.method");
    if (c.method->dim > static_cast<int>(c.parameters.size()))
      throw ValidationError("config.method.dim", "embedding dimension exceeds the number of items (" +
                                                   std::to_string(c.parameters.size()) + ")");
  }
  if (j.contains("oracle")) {
    c.oracle = detail::parse_oracle(j["oracle"], "config.oracle");
    if (c.oracle.kind == OracleSpec::Kind::Intrinsic &&
        (!c.method || c.method->kind != MethodKind::Isomap))
      throw ValidationError("config.oracle", "the intrinsic oracle compares Isomap geodesics");
    if (c.oracle.kind == OracleSpec::Kind::Population && c.mode != SettingMode::Sample)
      throw ValidationError("config.oracle", "the population oracle applies to sample mode");
  }
  if (j.contains("outputs"))
    c.outputs = detail::get_string(j["outputs"], "config.outputs");
  if (j.contains("covering_radius_report")) {
    if (!j["covering_radius_report"].is_boolean())
      throw ValidationError("config.covering_radius_report", "expected a boolean");
    c.covering_radius_report = j["covering_radius_report"].get<bool>();
  }
  if (j.contains("covering_reference")) {
    long r = detail::get_integer(j["covering_reference"], "config.covering_reference");
    if (r < 2)
      throw ValidationError("config.covering_reference", "must be >= 2");
    c.covering_reference = static_cast<std::size_t>(r);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_json(path)); }

// ---------------------------------------------------------------------------
// Runs

//! Named proportionality constants of the closed forms in use.
inline json constants_json(const FamilySpec& fam)
{
  json c = json::object();
  c["l2_uniform"] = constants::l2_uniform;
  c["l2_normal"] = constants::l2_normal(fam.data_dim());
  if (auto g = fam.as<GammaScale>(); g && g->shape > -0.5)
    c["l2_gamma_scale"] = constants::l2_gamma_scale(g->shape);
  return c;
}

struct DistancesResult
{
  DissimilarityMatrix matrix;
  std::vector<SampleSet> samples;
  std::string matrix_path;
};

inline std::vector<Density> config_densities(const ExperimentConfig& c)
{
  std::vector<Density> ds;
  for (const auto& t : c.parameters)
    ds.emplace_back(c.family, t);
  return ds;
}

//! Per-density sample seeds from the root seed's "samples" stream.
inline std::vector<SampleSet> config_samples(const ExperimentConfig& c)
{
  CounterRng root = CounterRng(c.seed).split("samples");
  std::vector<SampleSet> out;
  for (std::size_t i = 0; i < c.parameters.size(); ++i) {
    std::uint64_t s = root.split(static_cast<std::uint64_t>(i)).next_u64();
    out.push_back(sample(Density(c.family, c.parameters[i]), c.sample_size, s, c.labels[i]));
  }
  return out;
}

inline DistancesResult compute_distances(const ExperimentConfig& c)
{
  DistancesResult r;
  if (c.mode == SettingMode::Population) {
    r.matrix = pairwise_matrix(config_densities(c), c.metric, c.labels);
  } else {
    r.samples = config_samples(c);
    r.matrix = pairwise_matrix(r.samples, c.metric, c.estimator, c.labels);
  }
  return r;
}

//! Computes the matrix and writes <outputs>/matrix.csv (and the samples when
//! requested).
inline DistancesResult run_distances(const ExperimentConfig& c)
{
  std::filesystem::create_directories(c.outputs);
  DistancesResult r = compute_distances(c);
  r.matrix_path = (std::filesystem::path(c.outputs) / "matrix.csv").string();
  write_matrix_csv(r.matrix_path, r.matrix);
  if (c.write_samples) {
    auto dir = std::filesystem::path(c.outputs) / "samples";
    std::filesystem::create_directories(dir);
    for (const auto& s : r.samples)
      write_sample_csv((dir / (s.source_id + ".csv")).string(), s);
  }
  return r;
}

namespace detail {

inline const char* state_name(TriangleCheck::State s)
{
  switch (s) {
    case TriangleCheck::State::Holds:
      return "holds";
    case TriangleCheck::State::Violated:
      return "violated";
    default:
      return "unchecked";
  }
}

inline MetricTensorField oracle_field(const ExperimentConfig& c)
{
  switch (c.oracle.tensor) {
    case TensorKind::L2Info:
      return l2_field(c.family).scaled(c.oracle.scale);
    case TensorKind::WassersteinInfo1D:
      return wasserstein_field(c.family).scaled(c.oracle.scale);
    default:
      return fisher_field(c.family).scaled(c.oracle.scale);
  }
}

//! Writes `i,j,value,reference,abs_error,rel_error` and returns the maxima.
inline json error_table(const std::string& path, const DissimilarityMatrix& values,
                        const std::vector<std::size_t>& index, const std::vector<double>& reference,
                        std::size_t n_ref)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + path + "' for writing");
  os << "i,j,value,reference,abs_error,rel_error\n";
  double max_abs = 0.0, max_rel = 0.0;
  for (std::size_t a = 0; a < values.size(); ++a)
    for (std::size_t b = a + 1; b < values.size(); ++b) {
      double v = values.values(a, b);
      double ref = reference[index[a] * n_ref + index[b]];
      double err = std::abs(v - ref);
      double rel = ref > 0 ? err / ref : (err == 0 ? 0.0 : inf);
      max_abs = std::max(max_abs, err);
      max_rel = std::max(max_rel, rel);
      os << values.labels[a] << ',' << values.labels[b] << ',' << format_double(v) << ','
         << format_double(ref) << ',' << format_double(err) << ',' << format_double(rel) << '\n';
    }
  return { { "table", std::filesystem::path(path).filename().string() },
           { "max_abs_error", number_json(max_abs) },
           { "max_rel_error", number_json(max_rel) } };
}

//! eps_n = max over a reference lattice spanning the items' parameter box of
//! the smallest dissimilarity to an item (population densities).
inline double covering_radius(const ExperimentConfig& c)
{
  const std::size_t p = c.family.parameter_space.dim();
  if (p > 2)
    throw UnsupportedError("covering radius report supports p <= 2");
  Vector lo = c.parameters.front(), hi = c.parameters.front();
  for (const auto& t : c.parameters) {
    lo = lo.cwiseMin(t);
    hi = hi.cwiseMax(t);
  }
  const std::size_t k = c.covering_reference;
  std::size_t total = p == 1 ? k : k * k;
  auto items = config_densities(c);
  std::vector<double> best(total, inf);
  parallel_for(total, [&](std::size_t id) {
    Vector t(p);
    std::size_t rest = id;
    for (std::size_t j = 0; j < p; ++j) {
      std::size_t i = rest % k;
      rest /= k;
      t[j] = lo[j] + (hi[j] - lo[j]) * static_cast<double>(i) / static_cast<double>(k - 1);
    }
    Density q(c.family, t);
    for (const auto& d : items)
      best[id] = std::min(best[id], dissimilarity(q, d, c.metric));
  });
  return *std::max_element(best.begin(), best.end());
}

} // namespace detail

struct EmbedResult
{
  Embedding embedding;
  json report;
};

//! Embeds a matrix with the given method and writes embedding.csv, the
//! embedding.json sidecar, geodesics and edges for Isomap, and report.json.
//! `extra` is merged into the report before it is written.
inline EmbedResult embed_matrix(const DissimilarityMatrix& d, const MethodSpec& method,
                                const std::string& outputs, json extra = json::object(),
                                const ExperimentConfig* cfg = nullptr)
{
  auto t0 = std::chrono::steady_clock::now();
  if (method.dim > static_cast<int>(d.size()))
    throw ValidationError("method.dim", "embedding dimension exceeds the number of items (" +
                                          std::to_string(d.size()) + ")");
  std::filesystem::create_directories(outputs);
  auto out = [&](const char* name) { return (std::filesystem::path(outputs) / name).string(); };
  json report = json::object();
  report["version"] = FMDS_VERSION;
  for (auto& [k, v] : extra.items())
    report[k] = v;
  report["n"] = d.size();
  report["metric_triangle_scan"] = detail::state_name(d.metric_flag.state);

  EmbedResult res;
  const DissimilarityMatrix* target = &d;
  IsomapResult iso;
  if (method.kind == MethodKind::CS) {
    report["method"] = { { "kind", "cs" }, { "dim", method.dim } };
    res.embedding = classical_scaling(d, method.dim);
  } else {
    json m = { { "kind", "isomap" }, { "dim", method.dim } };
    NeighborhoodGraph g;
    if (method.radius) {
      m["radius"] = *method.radius;
      g = build_graph(d, *method.radius);
    } else {
      m["knn"] = *method.knn;
      g = build_knn_graph(d, *method.knn);
    }
    m["largest_component"] = method.policy == DisconnectionPolicy::LargestComponent;
    report["method"] = m;
    write_edge_list(out("edges.csv"), g);
    iso = detail::isomap_from_graph(g, method.dim, method.policy);
    res.embedding = iso.embedding;
    target = &iso.geodesics;
    write_matrix_csv(out("geodesics.csv"), iso.geodesics);
    json diag = { { "component_count", iso.diagnostics.component_count },
                  { "max_degree", iso.diagnostics.max_degree },
                  { "edge_count", iso.diagnostics.edge_count },
                  { "far_pair_fraction", iso.diagnostics.far_pair_fraction },
                  { "dropped_labels", iso.diagnostics.dropped_labels },
                  { "smallest_connecting_radius", number_json(smallest_connecting_radius(d)) } };
    report["isomap"] = diag;
    report["files"]["geodesics"] = "geodesics.csv";
    report["files"]["edges"] = "edges.csv";
  }

  Matrix b = double_center(*target);
  double st = stress(*target, res.embedding.coords);
  double sn = strain(b, res.embedding.coords);
  SchoenbergResult sch = schoenberg_check(*target);
  write_embedding_csv(out("embedding.csv"), res.embedding);
  write_json(out("embedding.json"), embedding_sidecar(res.embedding, st, sn, sch.min_eigenvalue));
  report["files"]["embedding"] = "embedding.csv";
  report["files"]["sidecar"] = "embedding.json";
  report["stress"] = number_json(st);
  report["strain"] = number_json(sn);
  report["eigenvalues"] = vector_json(res.embedding.eigenvalues);
  report["schoenberg"] = { { "min_eigenvalue", number_json(sch.min_eigenvalue) },
                           { "is_hilbertian", sch.is_hilbertian },
                           { "numerical_rank", sch.numerical_rank } };

  if (cfg && cfg->oracle.kind == OracleSpec::Kind::Intrinsic) {
    // Reference geodesic distances on the lattice, indexed by original item.
    std::vector<std::size_t> index;
    for (const auto& l : iso.geodesics.labels)
      index.push_back(static_cast<std::size_t>(
        std::find(cfg->labels.begin(), cfg->labels.end(), l) - cfg->labels.begin()));
    const std::size_t n = cfg->parameters.size();
    std::vector<double> ref(n * n, 0.0);
    MetricTensorField field = detail::oracle_field(*cfg);
    LatticeOptions lo;
    lo.cells = cfg->oracle.cells;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < index.size(); ++a)
      for (std::size_t b2 = a + 1; b2 < index.size(); ++b2)
        pairs.emplace_back(index[a], index[b2]);
    parallel_for(pairs.size(), [&](std::size_t k) {
      auto [i, j] = pairs[k];
      double v = intrinsic_distance(cfg->parameters[i], cfg->parameters[j], field, cfg->family, lo);
      ref[i * n + j] = ref[j * n + i] = v;
    });
    json o = detail::error_table(out("oracle_errors.csv"), iso.geodesics, index, ref, n);
    o["kind"] = "intrinsic";
    o["scale"] = cfg->oracle.scale;
    report["oracle"] = o;
  }
  report["wall_clock_seconds"] =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(out("report.json"), report);
  res.report = report;
  return res;
}

//! Full pipeline from a configuration: distances, optional population
//! oracle and covering radius, then the configured embedding.
inline EmbedResult run_embed(const ExperimentConfig& c)
{
  if (!c.method)
    throw ValidationError("config.method", "missing required field");
  auto t0 = std::chrono::steady_clock::now();
  DistancesResult dr = run_distances(c);
  json extra = json::object();
  extra["seed"] = c.seed;
  extra["config"] = c.source;
  extra["constants"] = constants_json(c.family);
  extra["files"] = { { "matrix", "matrix.csv" } };
  if (c.oracle.kind == OracleSpec::Kind::Population) {
    auto pop = pairwise_matrix(config_densities(c), c.metric, c.labels, TriangleScan::Never);
    std::vector<std::size_t> index(c.parameters.size());
    std::iota(index.begin(), index.end(), 0);
    std::vector<double> ref(pop.values.data(), pop.values.data() + pop.values.size());
    json o = detail::error_table((std::filesystem::path(c.outputs) / "oracle_errors.csv").string(),
                                 dr.matrix, index, ref, c.parameters.size());
    o["kind"] = "population";
    extra["oracle"] = o;
  }
  if (c.covering_radius_report)
    extra["covering_radius"] = number_json(detail::covering_radius(c));
  EmbedResult r = embed_matrix(dr.matrix, *c.method, c.outputs, extra, &c);
  r.report["wall_clock_seconds"] =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json((std::filesystem::path(c.outputs) / "report.json").string(), r.report);
  return r;
}

} // namespace fmds
