#pragma once

#include "error.hpp"
#include "mds.hpp"
#include "models.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace fmds {

using json = nlohmann::ordered_json;

//! JSON has no infinities; they are written as the strings "inf" / "-inf".
inline json number_json(double v)
{
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  if (std::isnan(v))
    return nullptr;
  return v;
}

inline json vector_json(const Vector& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(number_json(v[i]));
  return a;
}

inline json matrix_json(const Matrix& m)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

//! {theta: [...], matrix: [[...]]}
inline json tensor_json(const Vector& theta, const Matrix& a)
{
  return { { "theta", vector_json(theta) }, { "matrix", matrix_json(a) } };
}

//! Embedding sidecar {eigenvalues, stress, strain, schoenberg_min_eig}.
inline json embedding_sidecar(const Embedding& e, double stress_value, double strain_value,
                              double schoenberg_min_eig)
{
  return { { "eigenvalues", vector_json(e.eigenvalues) },
           { "stress", number_json(stress_value) },
           { "strain", number_json(strain_value) },
           { "schoenberg_min_eig", number_json(schoenberg_min_eig) } };
}

inline void write_json(const std::string& path, const json& j)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

inline json read_json(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Field access with paths for error messages

namespace detail {

inline const json& field(const json& obj, const std::string& key, const std::string& path)
{
  if (!obj.is_object())
    throw ValidationError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ValidationError(path + "." + key, "missing required field");
  return *it;
}

inline double get_number(const json& j, const std::string& path)
{
  if (j.is_number())
    return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf")
      return inf;
    if (s == "-inf")
      return -inf;
  }
  throw ValidationError(path, "expected a number");
}

inline long get_integer(const json& j, const std::string& path)
{
  if (!j.is_number_integer())
    throw ValidationError(path, "expected an integer");
  return j.get<long>();
}

inline std::string get_string(const json& j, const std::string& path)
{
  if (!j.is_string())
    throw ValidationError(path, "expected a string");
  return j.get<std::string>();
}

inline double number_or(const json& obj, const std::string& key, double fallback,
                        const std::string& path)
{
  auto it = obj.find(key);
  return it == obj.end() ? fallback : get_number(*it, path + "." + key);
}

//! Rejects keys outside `allowed` so typos do not pass silently.
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& path)
{
  if (!obj.is_object())
    throw ValidationError(path, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      ok = ok || k == a;
    if (!ok)
      throw ValidationError(path + "." + k, "unknown field");
  }
}

inline std::string base_shape_name(BaseShape b)
{
  switch (b) {
    case BaseShape::Normal:
      return "normal";
    case BaseShape::Logistic:
      return "logistic";
    case BaseShape::Laplace:
      return "laplace";
  }
  return "normal";
}

} // namespace detail

// ---------------------------------------------------------------------------
// FamilySpec

//! {"kind": ..., "params": {...}, "bounds": [[lo, hi], ...]}
inline json family_to_json(const FamilySpec& f)
{
  json params = json::object();
  if (auto n = f.as<NormalLocation>())
    params["dim"] = n->dim;
  else if (auto g = f.as<GammaScale>())
    params["shape"] = g->shape;
  else if (auto l = f.as<LocationScale1D>())
    params["base"] = detail::base_shape_name(l->base);
  else if (auto e = f.as<ExponentialFamily>())
    params["name"] = e->name;
  else if (auto t = f.as<TimeWarp1D>()) {
    params["base"] = t->base == WarpBase::Uniform ? "uniform" : "beta";
    if (t->base == WarpBase::Beta) {
      params["beta_a"] = t->beta_a;
      params["beta_b"] = t->beta_b;
    }
    params["warp"] = t->warp == WarpFamily::Power ? "power" : "spline";
    if (t->warp == WarpFamily::Spline)
      params["knots"] = t->knots;
  }
  json bounds = json::array();
  for (const auto& b : f.parameter_space.bounds())
    bounds.push_back(json::array({ number_json(b.lo), number_json(b.hi) }));
  return { { "kind", f.kind_name() }, { "params", params }, { "bounds", bounds } };
}

inline FamilySpec family_from_json(const json& j, const std::string& path = "family")
{
  detail::check_keys(j, { "kind", "params", "bounds" }, path);
  const std::string kind = detail::get_string(detail::field(j, "kind", path), path + ".kind");
  const json empty = json::object();
  const json& params = j.contains("params") ? j["params"] : empty;
  const std::string pp = path + ".params";
  if (!params.is_object())
    throw ValidationError(pp, "expected an object");

  FamilySpec f;
  try {
    if (kind == "NormalLocation") {
      detail::check_keys(params, { "dim" }, pp);
      long dim = params.contains("dim") ? detail::get_integer(params["dim"], pp + ".dim") : 1;
      if (dim < 1)
        throw ValidationError(pp + ".dim", "must be >= 1");
      f = make_normal_location(static_cast<int>(dim));
    } else if (kind == "UniformLocation1D") {
      detail::check_keys(params, {}, pp);
      f = make_uniform_location();
    } else if (kind == "GammaScale") {
      detail::check_keys(params, { "shape" }, pp);
      f = make_gamma_scale(detail::get_number(detail::field(params, "shape", pp), pp + ".shape"));
    } else if (kind == "LocationScale1D") {
      detail::check_keys(params, { "base" }, pp);
      std::string b = detail::get_string(detail::field(params, "base", pp), pp + ".base");
      if (b == "normal")
        f = make_location_scale(BaseShape::Normal);
      else if (b == "logistic")
        f = make_location_scale(BaseShape::Logistic);
      else if (b == "laplace")
        f = make_location_scale(BaseShape::Laplace);
      else
        throw ValidationError(pp + ".base", "expected one of normal, logistic, laplace");
    } else if (kind == "ExponentialFamily") {
      detail::check_keys(params, { "name" }, pp);
      std::string n = detail::get_string(detail::field(params, "name", pp), pp + ".name");
      if (n == "normal_natural")
        f = make_natural_normal();
      else if (n == "poisson")
        f = make_poisson();
      else if (n == "exponential")
        f = make_exponential_rate();
      else
        throw ValidationError(pp + ".name",
                              "expected one of normal_natural, poisson, exponential");
    } else if (kind == "TimeWarp1D") {
      detail::check_keys(params, { "base", "beta_a", "beta_b", "warp", "knots" }, pp);
      std::string b = params.contains("base") ? detail::get_string(params["base"], pp + ".base")
                                               : "uniform";
      if (b != "uniform" && b != "beta")
        throw ValidationError(pp + ".base", "expected uniform or beta");
      WarpBase base = b == "uniform" ? WarpBase::Uniform : WarpBase::Beta;
      double a = detail::number_or(params, "beta_a", 2.0, pp);
      double bb = detail::number_or(params, "beta_b", 2.0, pp);
      std::string w = params.contains("warp") ? detail::get_string(params["warp"], pp + ".warp")
                                               : "power";
      if (w == "power") {
        f = make_time_warp_power(base, a, bb);
      } else if (w == "spline") {
        const json& k = detail::field(params, "knots", pp);
        if (!k.is_array())
          throw ValidationError(pp + ".knots", "expected an array");
        std::vector<double> knots;
        for (std::size_t i = 0; i < k.size(); ++i)
          knots.push_back(detail::get_number(k[i], pp + ".knots[" + std::to_string(i) + "]"));
        f = make_time_warp_spline(std::move(knots), base, a, bb);
      } else {
        throw ValidationError(pp + ".warp", "expected power or spline");
      }
    } else {
      throw ValidationError(path + ".kind",
                            "unknown family '" + kind +
                              "'; expected NormalLocation, UniformLocation1D, GammaScale, "
                              "LocationScale1D, ExponentialFamily or TimeWarp1D");
    }
  } catch (const ModelError& e) {
    throw ValidationError(pp, e.what());
  }

  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    const std::string bp = path + ".bounds";
    if (!b.is_array() || b.size() != f.parameter_space.dim())
      throw ValidationError(bp, "expected " + std::to_string(f.parameter_space.dim()) +
                                  " [lo, hi] pairs");
    std::vector<Interval> iv;
    for (std::size_t i = 0; i < b.size(); ++i) {
      std::string ip = bp + "[" + std::to_string(i) + "]";
      if (!b[i].is_array() || b[i].size() != 2)
        throw ValidationError(ip, "expected [lo, hi]");
      Interval v{ detail::get_number(b[i][0], ip + "[0]"), detail::get_number(b[i][1], ip + "[1]") };
      const Interval& dflt = f.parameter_space[i];
      if (!(v.lo < v.hi))
        throw ValidationError(ip, "lo must be below hi");
      if (v.lo < dflt.lo || v.hi > dflt.hi)
        throw ValidationError(ip, "bounds must lie inside the family's natural parameter space");
      iv.push_back(v);
    }
    f.parameter_space = ParameterBox(std::move(iv));
  }
  return f;
}

//! Schema summary used by `fmds families`.
inline json family_catalog()
{
  json out = json::array();
  auto entry = [&](const char* kind, json params, const char* theta) {
    out.push_back({ { "kind", kind }, { "params", std::move(params) }, { "theta", theta } });
  };
  entry("NormalLocation", { { "dim", "integer >= 1 (default 1)" } }, "mean vector, R^dim");
  entry("UniformLocation1D", json::object(), "left endpoint of Unif(theta, theta + 1)");
  entry("GammaScale", { { "shape", "k > -1" } }, "scale theta > 0, base x^k e^-x / Gamma(k+1)");
  entry("LocationScale1D", { { "base", "normal | logistic | laplace" } },
        "[location, scale > 0], standardized base");
  entry("ExponentialFamily", { { "name", "normal_natural | poisson | exponential" } },
        "natural parameter");
  entry("TimeWarp1D",
        { { "base", "uniform | beta (default uniform)" },
          { "beta_a", "number > 0 (beta base)" },
          { "beta_b", "number > 0 (beta base)" },
          { "warp", "power | spline (default power)" },
          { "knots", "spline knots, 0 = t0 < ... < tK = 1" } },
        "power: exponent a in [0.01, 100]; spline: increasing warp values at interior knots");
  return out;
}

} // namespace fmds
