#include "cmsynth/workbench.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  cmsynth::CliOptions opt;
  CLI::App app{"Characteristic-mode array coupling and synthesis workbench", "cmsynth"};
  app.set_version_flag("--version", std::string(cmsynth::kVersion));
  app.add_option("command", opt.command, "modes | assemble | couple | solve | synth | oracle")
      ->required();
  app.add_option("--config", opt.config_path, "run configuration (JSON)")->required();
  app.add_option("--out", opt.out, "output directory");
  app.add_option("--seed", opt.seed, "seed for random port drives");
  app.add_option("--drive", opt.drive_path, "drive vector file (matrix text, one column)");
  app.add_option("--max-iter", opt.max_iter, "synthesis iteration cap");
  app.add_option("--n-modes", opt.n_modes, "modes kept per element");
  app.add_flag("--no-coupling", opt.no_coupling, "drop inter-element coupling");
  app.add_flag("--oracle", opt.oracle, "compare against the direct MoM solve");
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << R"({"error":{"kind":"config","message":")" << e.what() << "\"}}\n";
    return 2;
  }
  return cmsynth::run_command(opt, std::cout, std::cerr);
}
