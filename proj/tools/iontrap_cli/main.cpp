// iontrap: batch front end. One scenario per invocation:
//
//   iontrap <subcommand> --config <path> [--seed N] [--out DIR]
//
// Exit status: 0 success, 2 configuration or input error, 3 numerical
// failure or empty result.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/opensslv.h>

#include "commands.hpp"
#include "iontrap/errors.hpp"

#ifndef IONTRAP_VERSION
#define IONTRAP_VERSION "unknown"
#endif
#ifndef IONTRAP_YAML_CPP_VERSION
#define IONTRAP_YAML_CPP_VERSION "unknown"
#endif

namespace iontrap::cli {

std::string Context::read_input(const Section& section, const std::string& key) {
  const std::string rel = section.text(key);
  const auto path = config.resolve(rel);
  std::ifstream in(path, std::ios::binary);
  if (!in) section.fail(key, "cannot read file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  inputs.push_back({rel, sha256_hex(bytes)});
  return bytes;
}

const std::vector<std::pair<std::string, Command>>& command_table() {
  static const std::vector<std::pair<std::string, Command>> table{
      {"trap-stability", trap_stability}, {"trap-depth", trap_depth},
      {"chain-equispace", chain_equispace}, {"ramsey-t2", ramsey_t2},
      {"ms-gate", ms_gate},               {"parity-fit", parity_fit},
      {"micromotion", micromotion},       {"allan", allan},
      {"heating-fit", heating_fit},
  };
  return table;
}

namespace {

std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

nlohmann::ordered_json versions() {
  nlohmann::ordered_json v;
  v["iontrap"] = IONTRAP_VERSION;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
  v["boost"] = std::to_string(BOOST_VERSION / 100000) + "." +
               std::to_string(BOOST_VERSION / 100 % 1000) + "." + std::to_string(BOOST_VERSION % 100);
  v["yaml-cpp"] = IONTRAP_YAML_CPP_VERSION;
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  v["openssl"] = OPENSSL_VERSION_TEXT;
  v["cli11"] = CLI11_VERSION;
  v["compiler"] = compiler_id();
  return v;
}

struct Invocation {
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int run(const Invocation& inv, const Command& command) {
  const Config cfg = Config::load(inv.config);
  Section root = cfg.root();

  if (root.has("command")) {
    const std::string declared = root.text("command");
    if (declared != inv.command) {
      root.fail("command", "config is for '" + declared + "', not '" + inv.command + "'");
    }
  }
  std::uint64_t seed = 0;
  if (root.has("seed")) seed = static_cast<std::uint64_t>(root.integer("seed", 0, 1LL << 53));
  if (inv.seed) seed = *inv.seed;
  std::string out_dir = root.text("output_dir", "iontrap-out");
  if (inv.out) out_dir = *inv.out;

  Context ctx{cfg, root, seed, {}, {}, {}};
  command(ctx);
  cfg.finish();

  const std::string title = "iontrap " + inv.command;
  ctx.out.add_file("summary.txt", ctx.summary.text(title));
  nlohmann::ordered_json report;
  report["command"] = inv.command;
  report["seed"] = seed;
  report["results"] = ctx.summary.json();
  ctx.out.add_file("report.json", report.dump(2) + "\n");

  nlohmann::ordered_json manifest;
  manifest["tool"] = "iontrap";
  manifest["command"] = inv.command;
  manifest["seed"] = seed;
  manifest["config"] = {{"file", std::filesystem::path(inv.config).filename().string()},
                        {"sha256", sha256_hex(cfg.text())},
                        {"text", cfg.text()}};
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& in : ctx.inputs) inputs.push_back({{"path", in.path}, {"sha256", in.sha256}});
  manifest["inputs"] = inputs;
  manifest["versions"] = versions();
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  for (const auto& [name, bytes] : ctx.out.files()) {
    outputs.push_back({{"file", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }
  manifest["outputs"] = outputs;
  ctx.out.add_file("manifest.json", manifest.dump(2) + "\n");

  ctx.out.commit(out_dir);
  std::cout << ctx.summary.text(title) << "outputs written to " << out_dir << "\n";
  return 0;
}

}  // namespace
}  // namespace iontrap::cli

int main(int argc, char** argv) {
  using namespace iontrap::cli;
  CLI::App app{"Trapped-ion trap, chain, dynamics and analysis pipelines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IONTRAP_VERSION);

  Invocation inv;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& [name, fn] : command_table()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    sub->add_option("--config", inv.config, "scenario file (YAML)")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory");
    subs.emplace_back(sub, &fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const Command* command = nullptr;
  for (const auto& [sub, fn] : subs) {
    if (sub->parsed()) {
      inv.command = sub->get_name();
      if (sub->count("--seed")) inv.seed = seed;
      if (sub->count("--out")) inv.out = out;
      command = fn;
    }
  }

  try {
    return run(inv, *command);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const iontrap::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const OutputError& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return 2;
  } catch (const iontrap::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const EmptyResult& e) {
    std::cerr << "empty result: " << e.what() << "\n";
    return 3;
  }
}
