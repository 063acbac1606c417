// Runs every acceptance suite and prints one PASS/FAIL line per criterion.
// Tolerances live in the suites themselves (include/fmds/suites.hpp).

#include <fmds/suites.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv)
{
  std::uint64_t seed = 20240611;
  std::string out;
  for (int i = 1; i + 1 < argc; i += 2) {
    std::string a = argv[i];
    if (a == "--seed")
      seed = std::strtoull(argv[i + 1], nullptr, 10);
    else if (a == "--out")
      out = argv[i + 1];
    else {
      std::fprintf(stderr, "usage: fmds_acceptance [--seed N] [--out DIR]\n");
      return 2;
    }
  }

  int failed = 0, index = 0;
  for (const auto& info : fmds::suite_registry()) {
    auto r = fmds::run_suite(info.name, seed, out);
    const fmds::Check* h = r.headline();
    std::printf("%s %d. %s: %s %s = %.3g (%s %.3g) [%.2fs]\n", r.passed() ? "PASS" : "FAIL", ++index,
                info.name.c_str(), info.description.c_str(), h ? h->name.c_str() : "-",
                h ? h->value : 0.0, h ? h->comparison.c_str() : "", h ? h->tolerance : 0.0, r.seconds);
    if (!r.passed()) {
      ++failed;
      for (const auto& c : r.checks)
        if (!c.pass)
          std::printf("    failed check %s = %.6g (%s %.6g) %s\n", c.name.c_str(), c.value,
                      c.comparison.c_str(), c.tolerance, c.note.c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
