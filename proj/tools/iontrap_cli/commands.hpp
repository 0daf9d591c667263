#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "output.hpp"

namespace iontrap::cli {

struct InputFile {
  std::string path;  // as written in the config
  std::string sha256;
};

/// State one subcommand works against. Commands read parameters from
/// `root`, put every artifact into `out` and scalar results into `summary`.
struct Context {
  const Config& config;
  Section root;
  std::uint64_t seed = 0;
  OutputSet out;
  Summary summary;
  std::vector<InputFile> inputs;

  /// Reads a data file named by `section.key`, relative to the config, and
  /// records its digest for the manifest.
  std::string read_input(const Section& section, const std::string& key);
};

using Command = std::function<void(Context&)>;

void trap_stability(Context& ctx);
void trap_depth(Context& ctx);
void chain_equispace(Context& ctx);
void ramsey_t2(Context& ctx);
void ms_gate(Context& ctx);
void parity_fit(Context& ctx);
void micromotion(Context& ctx);
void allan(Context& ctx);
void heating_fit(Context& ctx);

/// Subcommand name -> implementation, in help order.
const std::vector<std::pair<std::string, Command>>& command_table();

}  // namespace iontrap::cli
