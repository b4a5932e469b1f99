#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace tsk {

// Exit codes: 0 ok, 2 configuration error, 3 numeric error, 4 data format error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitFormat = 4;

struct RunConfig {
    std::string command;  // gram | classify | regress | bench
    std::filesystem::path data;
    std::filesystem::path data2;  // test file for classification mode
    std::string format = "ucr";   // ucr | jsonl
    std::string strategy;
    std::optional<std::uint64_t> seed;
    int threads = 0;  // 0 = hardware concurrency
    std::filesystem::path out;
    nlohmann::json config = nlohmann::json::object();  // config file contents; flags win
};

int cmd_gram(const RunConfig& rc);
int cmd_classify(const RunConfig& rc);
int cmd_regress(const RunConfig& rc);
int cmd_bench(const RunConfig& rc);

// Parses flags, merges the config file, dispatches, and maps errors to exit
// codes. Never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace tsk
