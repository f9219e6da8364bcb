// vids: command-line front end.
//   vids <command> [--config FILE] [--seed N] [--out DIR]

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vids/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Amortized variational inference under covariate shift"};
  app.require_subcommand(1);

  vids::cli::Options opts;
  std::uint64_t seed = 0;
  std::string out;
  for (const std::string& name : vids::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "INI experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "run only this master seed");
    sub->add_option("--out", out, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error stage=cli kind=usage message=\"" << e.what() << "\"\n";
    return 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) opts.seed = seed;
  if (chosen->count("--out")) opts.out = out;
  return vids::cli::run_command(chosen->get_name(), opts, std::cout, std::cerr);
}
