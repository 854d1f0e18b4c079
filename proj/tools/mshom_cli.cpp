// mshom <homogenize|simulate|sweep> --config FILE [--out DIR] [--workers K] [--tol R]
//
// The subcommand selects the pipeline; a `mode` key in the config, if present,
// is overridden.
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include <CLI11.hpp>
#include <iostream>

#include "mshom/mshom.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical homogenization of multiscale Maxwell wave equations"};
  std::string config, out = "out";
  std::optional<int> workers;
  std::optional<double> tol;
  bool quiet = false, print_config = false;
  app.add_option("--config", config, "run configuration (key = value lines)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--workers", workers, "worker threads (overrides run.workers)")->check(CLI::PositiveNumber);
  app.add_option("--tol", tol, "relative solver tolerance (overrides solver.tol)");
  app.add_flag("--quiet", quiet, "no progress output");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  app.set_version_flag("--version", mshom::kVersion);
  app.fallthrough();
  app.require_subcommand(1);
  app.add_subcommand("homogenize", "compute homogenized tensors");
  app.add_subcommand("simulate", "run the homogenized and/or fine wave problem");
  app.add_subcommand("sweep", "corrector error sweep over epsilon with slope fit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    mshom::RunConfig cfg = mshom::load_config(config);
    cfg.mode = app.get_subcommands().front()->get_name();
    if (workers) cfg.workers = *workers;
    if (tol) cfg.tol = *tol;
    if (print_config) {
      cfg.validate();
      std::cout << cfg.canonical();
      return 0;
    }
    const mshom::RunResult res = mshom::execute(cfg, out, quiet ? nullptr : &std::cerr);
    if (res.report) {
      std::cout << "slope " << res.report->slope << " slope_ms " << res.report->slope_ms << "\n";
    }
    std::cout << "wrote " << out << "\n";
    return 0;
  } catch (const mshom::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mshom::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
