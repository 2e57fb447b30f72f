// Command-line front end: generate / verify / plan / simulate.
//
// Exit codes: 0 ok, 1 usage or file error, 2 degenerate layout, 3 invalid
// orbit, 4 verification mismatch, 5 planning failure, 6 simulation divergence.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "loadorbit/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"periodic non-stop carrier trajectories for cable-suspended loads"};
  app.require_subcommand(1);

  std::string config_path;
  std::string artifact_path;
  std::string out_path;
  std::string from_path;
  std::string to_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> samples;
  std::optional<double> eps_tension;
  std::optional<double> eps_speed;

  CLI::App* generate = app.add_subcommand(
      "generate", "sample and verify an orbit, writing an orbit artifact");
  generate->add_option("--config", config_path, "scenario config JSON")->required();
  generate->add_option("--out", out_path, "artifact output path")->required();
  generate->add_option("--seed", seed_override, "override the orbit sampler seed");

  CLI::App* verify = app.add_subcommand(
      "verify", "recompute an artifact's orbit report and compare");
  verify->add_option("--artifact", artifact_path, "orbit artifact JSON")->required();
  verify->add_option("--samples", samples, "period samples for the sweep");
  verify->add_option("--eps-tension", eps_tension, "tension threshold, N");
  verify->add_option("--eps-speed", eps_speed, "carrier speed threshold, m/s");
  verify->add_option("--out", out_path, "also write the recomputed report here");

  CLI::App* plan = app.add_subcommand(
      "plan", "plan a clearance-keeping path between two nullspace coordinates");
  plan->add_option("--config", config_path, "scenario config JSON")->required();
  plan->add_option("--from", from_path, "start lambda JSON file")->required();
  plan->add_option("--to", to_path, "goal lambda JSON file")->required();
  plan->add_option("--out", out_path, "waypoint output path")->required();
  plan->add_option("--seed", seed_override, "override the planner seed");

  CLI::App* simulate = app.add_subcommand(
      "simulate", "run the closed-loop scenario for an orbit artifact");
  simulate->add_option("--artifact", artifact_path, "orbit artifact JSON")->required();
  simulate->add_option("--config", config_path, "scenario config JSON")->required();
  simulate->add_option("--out", out_path, "time-series CSV output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return loadorbit::kExitUsage;
  }

  if (generate->parsed()) {
    return loadorbit::cmd_generate(config_path, out_path, seed_override, std::cout,
                                   std::cerr);
  }
  if (verify->parsed()) {
    return loadorbit::cmd_verify(artifact_path, samples, eps_tension, eps_speed, out_path,
                                 std::cout, std::cerr);
  }
  if (plan->parsed()) {
    return loadorbit::cmd_plan(config_path, from_path, to_path, out_path, seed_override,
                               std::cout, std::cerr);
  }
  return loadorbit::cmd_simulate(artifact_path, config_path, out_path, std::cout,
                                 std::cerr);
}
