// specvoc <subcommand> --config <path> [--seed N] [--out DIR] [--policies LIST]
//         [--gamma N] [--mode lossless|greedy]
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "specvoc/specvoc.h"

namespace {

using Json = nlohmann::json;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> policies;
  std::optional<std::size_t> gamma;
  std::optional<std::string> mode;
};

int report_error(const std::string& error, const std::string& message) {
  std::cerr << Json{{"error", error}, {"message", message}}.dump() << std::endl;
  return 2;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run(const std::string& command, const Overrides& o) {
  Json config = Json::object();
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) return report_error("IoError", "cannot open config " + o.config_path);
    try {
      config = Json::parse(in);
    } catch (const Json::exception& e) {
      return report_error("ConfigError", "malformed config " + o.config_path + ": " + e.what());
    }
  }
  if (o.seed) config["seed"] = *o.seed;
  if (o.out) config["out"] = *o.out;
  if (o.policies) config["bench"]["policies"] = split_list(*o.policies);
  if (o.gamma) config["bench"]["gamma"] = *o.gamma;
  if (o.mode) config["bench"]["mode"] = *o.mode;

  specvoc_report* report = nullptr;
  const specvoc_status st = specvoc_run(command.c_str(), config.dump().c_str(), &report);
  if (st != SPECVOC_OK) return report_error(specvoc_status_name(st), specvoc_last_error_message());
  std::cout << specvoc_report_json(report) << std::endl;
  const int passed = specvoc_report_passed(report);
  specvoc_report_free(report);
  if (passed == 0) {
    std::cerr << Json{{"error", "CheckFailed"}, {"message", command + " reported a failed check"}}.dump()
              << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic vocabulary shortlisting lab for speculative decoding"};
  app.set_version_flag("--version", std::string(specvoc_version()));
  app.require_subcommand(1);

  Overrides o;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"pipeline", "train models, cluster the LM head, collect router data, train the router"},
      {"cluster", "re-cluster the LM head of a trained model"},
      {"train-router", "collect router data and train the router"},
      {"bench", "compare shortlist policies by accepted length and draft cost"},
      {"theory", "check acceptance and speedup formulas against brute force"},
      {"exactness", "Monte-Carlo check that lossless verification preserves the target law"},
      {"plot-data", "accepted length versus mean shortlist size series"},
      {"print-config", "print the default configuration"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "print-config") continue;
    sub->add_option("--config", o.config_path, "JSON config overlaying the defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "artifact and report directory");
    sub->add_option("--policies", o.policies, "comma-separated policy list for bench");
    sub->add_option("--gamma", o.gamma, "speculation length for bench");
    sub->add_option("--mode", o.mode, "verification mode for bench")
        ->check(CLI::IsMember({"lossless", "greedy"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "print-config") {
    std::cout << specvoc_default_config() << std::endl;
    return 0;
  }
  return run(command, o);
}
