#include <iostream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "signflow/config.hpp"
#include "signflow/errors.hpp"
#include "signflow/run.hpp"

using namespace signflow;

int main(int argc, char** argv) {
  CLI::App app{"Descending-flow solver for three-solution Dirichlet problems"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("-c,--config", config_path, "flat key=value configuration file");

  const std::pair<const char*, Command> table[] = {
      {"solve-positive", Command::solve_positive},
      {"solve-negative", Command::solve_negative},
      {"solve-sign-changing", Command::solve_sign_changing},
      {"solve-all", Command::solve_all},
      {"verify-lemmas", Command::verify_lemmas},
      {"deform-demo", Command::deform_demo},
      {"probe-cones", Command::probe_cones},
  };
  for (const auto& [name, cmd] : table) {
    (void)cmd;
    app.add_subcommand(name);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    Command cmd = Command::solve_all;
    for (const auto& [name, c] : table)
      if (app.got_subcommand(name)) cmd = c;

    RunSummary summary = execute(cmd, cfg, std::cout);
    for (const std::string& f : summary.failures) std::cerr << "failure: " << f << "\n";
    std::cout << "summary written to " << cfg.output_dir << "/summary.txt\n";
    return summary.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SolveError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
