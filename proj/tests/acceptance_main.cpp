// Prints one PASS/FAIL line per acceptance criterion; exit status 0 iff all pass.

#include <CLI11.hpp>
#include <cstdio>

#include "kk/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kk acceptance suite"};
  kk::AcceptanceOptions opt;
  app.add_flag("--quick", opt.quick, "reduced resolution");
  app.add_option("--only", opt.only, "criterion ids to run");
  CLI11_PARSE(app, argc, argv);
  int failed = 0;
  kk::run_acceptance(opt, [&](const kk::CriterionResult& r) {
    std::printf("%s\n", kk::format_result(r).c_str());
    std::fflush(stdout);
    failed += !r.pass;
  });
  std::printf("%d failed\n", failed);
  return failed == 0 ? 0 : 1;
}
