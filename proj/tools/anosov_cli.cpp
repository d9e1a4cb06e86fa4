#include <iostream>

#include <CLI11.hpp>

#include "anosov/cli.hpp"

int main(int argc, char** argv) {
  using anosov::cli::Options;
  CLI::App app{"Geodesic, spectral and collar experiments on surfaces with boundary"};
  app.set_version_flag("--version", std::string(anosov::io::kVersion));
  app.require_subcommand(1, 1);

  Options opt;
  std::uint64_t seed = 0;
  int threads = 1;
  const std::pair<const char*, const char*> commands[] = {
      {"lens", "Exit data of Liouville-sampled boundary geodesics"},
      {"distance", "Marked boundary distances: pairs, winding sweep or two-metric comparison"},
      {"prescribe", "Conformal factor realizing a prescribed scalar curvature change"},
      {"extend", "Collar profile with curvature certificate and ell sweep"},
      {"diagnose", "Convexity, conjugate points, trapped fraction and Lyapunov exponent"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "YAML experiment file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Overrides the configured seed");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* sub = app.get_subcommands().front();
  opt.command = sub->get_name();
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--threads")) opt.threads = threads;
  return anosov::cli::run(opt);
}
