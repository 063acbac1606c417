#include <fmds/experiment.hpp>
#include <fmds/suites.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fmds;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
  fs::path p = fs::temp_directory_path() / ("fmds-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json base_config(const fs::path& out)
{
  json j = json::parse(R"({
    "seed": 7,
    "model": { "family": { "kind": "NormalLocation", "params": { "dim": 1 } },
               "points": [[0], [1], [2]] },
    "metric": { "kind": "hellinger" }
  })");
  j["outputs"] = out.string();
  return j;
}

std::string validation_path(const json& j)
{
  try {
    parse_config(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(Config, MinimalParses)
{
  auto c = parse_config(base_config("x"));
  EXPECT_EQ(c.parameters.size(), 3u);
  EXPECT_EQ(c.labels[1], "t1");
  EXPECT_EQ(c.mode, SettingMode::Population);
  EXPECT_FALSE(c.method.has_value());
}

TEST(Config, ErrorsNameTheField)
{
  json j = base_config("x");
  j["mode"] = { { "kind", "sample" }, { "m", 0 } };
  EXPECT_NE(validation_path(j).find("config.mode.m"), std::string::npos);

  j = base_config("x");
  j["method"] = { { "kind", "cs" }, { "dim", 4 } };
  EXPECT_NE(validation_path(j).find("config.method.dim"), std::string::npos);

  j = base_config("x");
  j["metric"]["kind"] = "bogus";
  EXPECT_NE(validation_path(j).find("config.metric.kind"), std::string::npos);

  j = base_config("x");
  j["colour"] = 1;
  EXPECT_NE(validation_path(j).find("colour"), std::string::npos);

  j = base_config("x");
  j["model"]["grid"] = { { "from", { 0 } }, { "to", { 1 } }, { "count", 3 } };
  EXPECT_NE(validation_path(j).find("config.model"), std::string::npos);

  j = base_config("x");
  j["method"] = { { "kind", "isomap" }, { "dim", 1 } };
  EXPECT_NE(validation_path(j).find("config.method"), std::string::npos);
}

TEST(Config, IntrinsicOracleNeedsIsomap)
{
  json j = base_config("x");
  j["method"] = { { "kind", "cs" }, { "dim", 1 } };
  j["oracle"] = { { "kind", "intrinsic" }, { "tensor", "fisher" } };
  EXPECT_THROW(parse_config(j), ValidationError);
}

TEST(Config, GridAndRandomParameters)
{
  json j = base_config("x");
  j["model"].erase("points");
  j["model"]["grid"] = { { "from", { 0 } }, { "to", { 1 } }, { "count", 5 } };
  auto c = parse_config(j);
  ASSERT_EQ(c.parameters.size(), 5u);
  EXPECT_DOUBLE_EQ(c.parameters[3][0], 0.75);

  j["model"].erase("grid");
  j["model"]["random"] = { { "count", 4 }, { "lo", { -1 } }, { "hi", { 1 } } };
  auto a = parse_config(j), b = parse_config(j);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a.parameters[i][0], b.parameters[i][0]);
    EXPECT_LE(std::abs(a.parameters[i][0]), 1.0);
  }
}

TEST(Config, FamilyErrors)
{
  EXPECT_THROW(family_from_json(json{ { "kind", "Cauchy" } }), ValidationError);
  EXPECT_THROW(family_from_json(json{ { "kind", "GammaScale" }, { "params", { { "shape", -2 } } } }),
               ValidationError);
  EXPECT_THROW(family_from_json(json{ { "kind", "NormalLocation" }, { "bounds", { { 1, 0 } } } }),
               ValidationError);
}

TEST(Config, FamilyRoundTrip)
{
  for (const FamilySpec& f : { make_gamma_scale(1.5), make_location_scale(BaseShape::Laplace),
                               make_poisson(), make_normal_location(3) }) {
    json j = family_to_json(f);
    EXPECT_EQ(family_to_json(family_from_json(j)), j);
  }
}

TEST(Distances, HellingerNormalMatrix)
{
  auto out = scratch_dir("distances");
  auto c = parse_config(base_config(out));
  auto r = run_distances(c);
  EXPECT_NEAR(r.matrix(0, 1), std::sqrt(2 - 2 * std::exp(-1.0 / 8)), 1e-12);
  EXPECT_NEAR(r.matrix(0, 2), std::sqrt(2 - 2 * std::exp(-0.5)), 1e-12);
  EXPECT_TRUE(fs::exists(out / "matrix.csv"));
  std::string first = slurp(out / "matrix.csv");
  run_distances(c);
  EXPECT_EQ(slurp(out / "matrix.csv"), first);
  fs::remove_all(out);
}

TEST(Distances, SampleModeWritesSamples)
{
  auto out = scratch_dir("samples");
  json j = base_config(out);
  j["metric"]["kind"] = "w2";
  j["mode"] = { { "kind", "sample" }, { "m", 200 }, { "write_samples", true } };
  auto r = run_distances(parse_config(j));
  ASSERT_EQ(r.samples.size(), 3u);
  EXPECT_TRUE(fs::exists(out / "samples" / "t0.csv"));
  auto back = read_sample_csv((out / "samples" / "t2.csv").string());
  EXPECT_EQ(back.data, r.samples[2].data);
  EXPECT_NEAR(r.matrix(0, 2), 2.0, 0.4);
  fs::remove_all(out);
}

TEST(Embed, W2LocationIsExact)
{
  auto out = scratch_dir("embed-w2");
  json j = base_config(out);
  j["metric"]["kind"] = "w2";
  j["model"]["points"] = { { 0 }, { 0.5 }, { 1.3 }, { 2 }, { 4 } };
  j["method"] = { { "kind", "cs" }, { "dim", 1 } };
  auto r = run_embed(parse_config(j));
  EXPECT_LE(r.report["stress"].get<double>(), 1e-10);
  for (const char* f : { "matrix.csv", "embedding.csv", "embedding.json", "report.json" })
    EXPECT_TRUE(fs::exists(out / f)) << f;
  fs::remove_all(out);
}

TEST(Embed, ReportIsDeterministic)
{
  auto out = scratch_dir("embed-det");
  json j = base_config(out);
  j["model"]["points"] = { { 0 }, { 0.5 }, { 1.3 }, { 2 } };
  j["method"] = { { "kind", "cs" }, { "dim", 2 } };
  auto c = parse_config(j);
  json a = run_embed(c).report;
  std::string emb = slurp(out / "embedding.csv");
  json b = run_embed(c).report;
  a.erase("wall_clock_seconds");
  b.erase("wall_clock_seconds");
  EXPECT_EQ(a, b);
  EXPECT_EQ(slurp(out / "embedding.csv"), emb);
  fs::remove_all(out);
}

TEST(Embed, IsomapIntrinsicOracleTable)
{
  auto out = scratch_dir("embed-iso");
  json j = base_config(out);
  j["model"].erase("points");
  j["model"]["grid"] = { { "from", { 0 } }, { "to", { 1 } }, { "count", 500 } };
  j["method"] = { { "kind", "isomap" }, { "dim", 1 }, { "radius", 0.05 } };
  j["oracle"] = { { "kind", "intrinsic" }, { "tensor", "fisher" }, { "scale", 0.25 } };
  auto r = run_embed(parse_config(j));
  EXPECT_LT(r.report["oracle"]["max_rel_error"].get<double>(), 1e-3);
  EXPECT_EQ(r.report["isomap"]["component_count"].get<std::size_t>(), 1u);
  std::ifstream table(out / "oracle_errors.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(table, line))
    ++rows;
  EXPECT_EQ(rows, 1 + 500u * 499 / 2);
  fs::remove_all(out);
}

TEST(Embed, MatrixDimensionChecked)
{
  auto out = scratch_dir("embed-dim");
  auto d = run_distances(parse_config(base_config(out))).matrix;
  MethodSpec m;
  m.dim = 5;
  EXPECT_THROW(embed_matrix(d, m, out.string()), ValidationError);
  fs::remove_all(out);
}

TEST(Suites, UnknownNameListsAlternatives)
{
  try {
    find_suite("nope");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("closed-forms"), std::string::npos) << msg;
    EXPECT_NE(msg.find("schoenberg"), std::string::npos) << msg;
  }
}

TEST(Suites, RegistryHasTenEntries)
{
  EXPECT_EQ(suite_registry().size(), 10u);
}

TEST(Suites, QuickSuitesPass)
{
  for (const char* name : { "cs-exactness", "schoenberg" }) {
    auto r = run_suite(name, 20240611);
    EXPECT_TRUE(r.passed()) << suite_json(r).dump(2);
  }
}
