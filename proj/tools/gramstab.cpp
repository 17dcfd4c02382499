#include <cstdlib>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "gramstab/cli.hpp"

namespace {

void configure_logging() {
  const char* env = std::getenv("GRAMSTAB_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("GRAMSTAB_LOG='{}' not recognized, using info", level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Gramian-based rapid stabilization of linear control systems"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool zero_c = false;

  for (const char* name : {"gramian", "stabilize", "verify", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "overrides the configured seed");
    if (std::string(name) == "verify") {
      sub->add_flag("--zero-c", zero_c, "replace C by 0 before verifying");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gramstab::cli::kConfigError;
  }

  gramstab::cli::CommandOptions opts;
  opts.out_dir = out_dir;
  opts.zero_c = zero_c;
  return gramstab::cli::run(app.get_subcommands().front()->get_name(), config, opts, seed);
}
