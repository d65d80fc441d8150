#pragma once

#include "invivo/coordination_server.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace invivo::cli {

inline constexpr int kSuccess = 0;
inline constexpr int kDomainFailure = 1;  ///< invalid, unknown or unsatisfiable
inline constexpr int kUsageError = 2;     ///< usage, file or parse errors

struct CommandOutcome {
    int exit_code = kSuccess;
    std::string out;
    std::string err;
};

/// Environment variable naming the default server state directory.
inline constexpr const char* kStateDirEnv = "INVIVO_STATE_DIR";

CommandOutcome validate(const std::string& model_path, const std::string& config_path, bool json);
/// `tested_path` is a binary snapshot or a text file with one comma-separated tuple per line.
CommandOutcome classify(const std::string& model_path, const std::string& tested_path, const std::string& config_path,
                        bool json);
CommandOutcome count(const std::string& model_path, bool json);
CommandOutcome sample(const std::string& model_path, std::size_t n, std::optional<std::uint64_t> seed, bool json);
CommandOutcome map_prefs(const std::string& schema_path, const std::string& root,
                         const std::optional<std::string>& model_out, const std::optional<std::string>& report_out,
                         bool json);
CommandOutcome merge(const std::string& device_path, const std::string& app_path, const std::string& root,
                     const std::optional<std::string>& out, bool json);
CommandOutcome tested_build(const std::string& model_path, const std::string& tuples_path, const std::string& out,
                            bool json);
CommandOutcome tested_dump(const std::string& model_path, const std::string& snapshot_path, bool json);

struct SimulateOptions {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool stress = false;
    std::size_t workers = 8;
};
CommandOutcome simulate(const SimulateOptions& options, bool json);

struct GenerateOptions {
    std::string name = "Synthetic";
    std::size_t primitives = 461;
    std::size_t compounds = 106;
    std::size_t categories = 4;
    std::size_t constraints = 4;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};
CommandOutcome generate_model(const GenerateOptions& options, bool json);

struct ServeOptions {
    std::optional<std::string> state_dir;  ///< falls back to kStateDirEnv
    std::optional<std::string> model_path;  ///< required for a fresh state directory
    std::size_t suite_size = 5;
    std::string app_id = "app";
    double lease_seconds = 600;
    bool migrate_on_publish = false;
};
/// Loads `<state_dir>/state.json` or, when absent, creates and saves a fresh
/// server. Throws std::runtime_error with a usage message on bad input.
std::unique_ptr<CoordinationServer> open_server(const ServeOptions& options);

}  // namespace invivo::cli
