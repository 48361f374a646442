#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedwad/config.hpp"
#include "fedwad/measures.hpp"

namespace fedwad::cli {

// FedWaD session flags shared by every subcommand that runs the protocol.
// Values come from defaults, then the optional --config JSON file, then flags.
struct FedFlags {
  std::string config_path;
  unsigned rounds = 20;
  Index support = 10;
  std::string mode = "approx";
  double t = 0.5;
  std::vector<double> t_range;
  std::string init = "gaussian";
  std::string report = "last";
  double stop_tol = 0.0;
  std::map<std::string, CLI::Option*> given;
};

void add_fed_flags(CLI::App& sub, FedFlags& flags);
FedConfig build_fed_config(const FedFlags& flags, std::uint64_t seed);

DiscreteMeasure load_measure(const std::string& path);
// Writes to stdout when path is empty or "-"; throws Error(Io) otherwise on failure.
void emit(const std::string& path, const std::string& text);

void register_core_commands(CLI::App& app, std::uint64_t& seed, std::string& out);
void register_app_commands(CLI::App& app, std::uint64_t& seed, std::string& out);
void register_bench_commands(CLI::App& app, std::uint64_t& seed, std::string& out);

}  // namespace fedwad::cli
