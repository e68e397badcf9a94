// delayflow: ring-road simulations, stability maps and fundamental-diagram bounds.
//
//   delayflow run <config|preset> [--seed N] [--out DIR] [--stride K] [--format csv|csv+svg]
//   delayflow stability <mapspec|f1|f23|f3> [--out DIR] [--format ...]
//   delayflow fd <params|pedestrian|vehicle> [--data file.csv] [--out DIR] [--format ...]
//
// Exit codes: 0 ok, 2 configuration error, 3 model error at runtime.

#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace delayflow;
  CLI::App cli{"Delayed car-following and macroscopic traffic models on a ring"};
  cli.require_subcommand(1);

  std::string target;
  std::string format = "csv";
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t stride = 0;
  std::string data_file;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "csv or csv+svg")->check(CLI::IsMember({"csv", "csv+svg"}));
  };

  auto* run = cli.add_subcommand("run", "simulate a scenario (file or preset paper-jam|paper-random|paper-perturbed)");
  run->add_option("config", target)->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--stride", stride, "record every K steps");
  add_common(run);

  auto* stab = cli.add_subcommand("stability", "linear stability map (file or preset f1|f23|f3)");
  stab->add_option("mapspec", target)->required();
  add_common(stab);

  auto* fd = cli.add_subcommand("fd", "fundamental diagram with hysteresis bounds (file or preset pedestrian|vehicle)");
  fd->add_option("params", target)->required();
  fd->add_option("--data", data_file, "empirical density,speed CSV to overlay");
  add_common(fd);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  app::OutputOptions opt;
  opt.svg = format == "csv+svg";
  if (!out_dir.empty()) opt.out_dir = out_dir;
  if (run->count("--seed")) opt.seed = seed;
  if (run->count("--stride")) opt.stride = stride;

  try {
    if (run->parsed()) {
      app::cmd_run(load_scenario(target), opt, std::cout);
    } else if (stab->parsed()) {
      app::cmd_stability(load_map_spec(target), opt, std::cout);
    } else {
      const auto r = app::cmd_fd(load_fd_params(target), data_file.empty() ? std::nullopt : std::optional(data_file), opt, std::cout);
      for (const auto& e : r.data_errors) std::cerr << "data: " << e << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return kExitModel;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
