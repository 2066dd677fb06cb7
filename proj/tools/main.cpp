#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bmsense/errors.hpp"
#include "bmsense/experiment.hpp"

namespace {

using Command = std::function<bmsense::CommandResult(const bmsense::ExperimentConfig&)>;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long long> trials;
  bool quiet = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bmsense: factored matrix sensing solver and landscape certificates"};
  app.require_subcommand(1);

  Overrides ov;
  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"gen", {"generate X*, operator, noise and measurements", bmsense::cmd_gen}},
      {"solve", {"run seeded gradient-descent trials", bmsense::cmd_solve}},
      {"analyze", {"certify the solved points", bmsense::cmd_analyze}},
      {"saddle", {"strict-saddle certificates at the origin and given points", bmsense::cmd_saddle}},
      {"rip", {"Monte-Carlo RIP constants over a p grid", bmsense::cmd_rip}},
      {"phase", {"success rate versus p", bmsense::cmd_phase}},
  };
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", ov.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", ov.out, "output directory");
    sub->add_option("--seed", ov.seed, "master seed");
    sub->add_option("--trials", ov.trials, "number of trials")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", ov.quiet, "suppress the status line");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    bmsense::ExperimentConfig cfg =
        ov.config.empty() ? bmsense::parse_config("{}") : bmsense::load_config(ov.config);
    if (!ov.out.empty()) cfg.out_dir = ov.out;
    if (ov.seed) cfg.master_seed = *ov.seed;
    if (ov.trials) cfg.trials = *ov.trials;
    cfg.validate();
    const bmsense::CommandResult res = commands.at(name).second(cfg);
    if (!ov.quiet || res.exit_code != 0) {
      std::fprintf(res.exit_code == 0 ? stdout : stderr, "%s: %s\n", name.c_str(),
                   res.message.c_str());
    }
    return res.exit_code;
  } catch (const bmsense::InvalidInputError& e) {
    std::fprintf(stderr, "%s: invalid config: %s\n", name.c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: error: %s\n", name.c_str(), e.what());
    return 1;
  }
}
