#include <cstdlib>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "fedwad/error.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("fedwad");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FEDWAD_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept "off" when asked for.
    if (level != spdlog::level::off || std::string_view(env) == "off") {
      spdlog::set_level(level);
    } else {
      spdlog::warn("FEDWAD_LOG={} not recognized, keeping 'warn'", env);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Federated Wasserstein distance toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  // Bound by each subcommand; every subcommand owns its own --seed/--out.
  std::uint64_t seed = 0;
  std::string out;
  fedwad::cli::register_core_commands(app, seed, out);
  fedwad::cli::register_app_commands(app, seed, out);
  fedwad::cli::register_bench_commands(app, seed, out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 2;
  } catch (const fedwad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
