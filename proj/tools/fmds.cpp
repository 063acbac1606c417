// fmds: distances, embeddings and named suites from the command line.

#include <fmds/fmds.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

int cmd_distances(const std::string& config)
{
  auto cfg = fmds::load_config(config);
  auto r = fmds::run_distances(cfg);
  std::cout << r.matrix_path << '\n';
  return 0;
}

struct EmbedArgs
{
  std::string config, matrix, method = "cs", out = "fmds-out";
  int dim = 2;
  double radius = 0.0;
  std::size_t knn = 0;
  bool largest = false;
};

int cmd_embed(const EmbedArgs& a)
{
  if (!a.config.empty()) {
    auto r = fmds::run_embed(fmds::load_config(a.config));
    std::cout << r.report.dump(2) << '\n';
    return 0;
  }
  fmds::MethodSpec m;
  m.dim = a.dim;
  if (a.method == "isomap") {
    m.kind = fmds::MethodKind::Isomap;
    if ((a.radius > 0) == (a.knn > 0))
      throw fmds::ValidationError("--radius/--knn", "isomap needs exactly one of them");
    if (a.radius > 0)
      m.radius = a.radius;
    else
      m.knn = a.knn;
    if (a.largest)
      m.policy = fmds::DisconnectionPolicy::LargestComponent;
  }
  auto d = fmds::read_matrix_csv(a.matrix);
  fmds::json extra = { { "matrix", a.matrix } };
  auto r = fmds::embed_matrix(d, m, a.out, extra);
  std::cout << r.report.dump(2) << '\n';
  return 0;
}

int cmd_suite(const std::string& name, const std::string& out, std::uint64_t seed)
{
  std::vector<std::string> names;
  if (name == "all")
    for (const auto& s : fmds::suite_registry())
      names.push_back(s.name);
  else
    names.push_back(fmds::find_suite(name).name);
  bool ok = true;
  for (const auto& n : names) {
    auto r = fmds::run_suite(n, seed, out);
    ok = ok && r.passed();
    std::cout << (r.passed() ? "PASS " : "FAIL ") << n << " (" << fmds::format_double(r.seconds)
              << " s)\n";
    for (const auto& c : r.checks)
      std::cout << "  " << (c.pass ? "ok   " : "fail ") << c.name << " = " << fmds::format_double(c.value)
                << ' ' << c.comparison << ' ' << fmds::format_double(c.tolerance)
                << (c.note.empty() ? "" : "  [" + c.note + "]") << '\n';
  }
  return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Embeddings of statistical models from pairwise density dissimilarities" };
  app.set_version_flag("--version", std::string(FMDS_VERSION));
  app.require_subcommand(1);

  std::string config;
  auto* distances = app.add_subcommand("distances", "compute the dissimilarity matrix of a config");
  distances->add_option("--config", config, "JSON configuration")->required()->check(CLI::ExistingFile);

  EmbedArgs ea;
  auto* embed = app.add_subcommand("embed", "embed from a config or a matrix CSV");
  auto* ocfg = embed->add_option("--config", ea.config, "JSON configuration")->check(CLI::ExistingFile);
  auto* omat = embed->add_option("--matrix", ea.matrix, "dissimilarity matrix CSV")->check(CLI::ExistingFile);
  ocfg->excludes(omat);
  embed->add_option("--method", ea.method, "cs or isomap")->check(CLI::IsMember({ "cs", "isomap" }));
  embed->add_option("--dim", ea.dim, "embedding dimension")->check(CLI::PositiveNumber);
  embed->add_option("--radius", ea.radius, "isomap radius")->check(CLI::PositiveNumber);
  embed->add_option("--knn", ea.knn, "isomap neighbor count")->check(CLI::PositiveNumber);
  embed->add_flag("--largest-component", ea.largest, "isomap: keep the largest component");
  embed->add_option("--out", ea.out, "output directory (matrix mode)");

  std::string suite_name, suite_out = "fmds-suites";
  std::uint64_t seed = 20240611;
  auto* suite = app.add_subcommand("suite", "run a named suite (or 'all')");
  suite->add_option("name", suite_name, "suite name")->required();
  suite->add_option("--out", suite_out, "output directory");
  suite->add_option("--seed", seed, "root seed");

  auto* families = app.add_subcommand("families", "list family kinds and parameter schemas");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*distances)
      return cmd_distances(config);
    if (*embed) {
      if (ea.config.empty() && ea.matrix.empty())
        throw fmds::ValidationError("embed", "one of --config, --matrix is required");
      return cmd_embed(ea);
    }
    if (*suite)
      return cmd_suite(suite_name, suite_out, seed);
    if (*families) {
      std::cout << fmds::family_catalog().dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
