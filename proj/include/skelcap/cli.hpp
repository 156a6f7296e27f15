#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace skelcap {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "SKELCAP_CONFIG";

nlohmann::ordered_json default_config();

// Runs one command line (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skelcap
