#pragma once

#include "invivo/coordination_server.hpp"
#include "invivo/feature_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace invivo::sim {

using Json = protocol::Json;

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration as listed in a scenario: explicit feature names, or drawn
/// uniformly from the model with the device's generator.
struct ConfigSpec {
    bool sample = false;
    std::vector<FeatureId> names;
};

struct DeviceSpec {
    std::string id;
    std::optional<ConfigSpec> config;
    double join = 0;
};

enum class EventKind { ConfigChange, ScreenLock, DeviceJoin, DeviceLeave, ModelPublish };
const char* to_string(EventKind kind);

struct SimEvent {
    double time = 0;
    EventKind kind = EventKind::ScreenLock;
    std::string device;              ///< empty for operator events
    std::optional<ConfigSpec> config;  ///< ConfigChange
    std::string document;            ///< ModelPublish
    bool migrate = false;            ///< ModelPublish
};

/// A test fails on every configuration that selects all `when` features.
struct FaultRule {
    std::string test;
    std::vector<FeatureId> when;
    std::string detail;
};

struct Arrivals {
    double screen_lock_rate = 0;    ///< per device, events per second
    double config_change_rate = 0;  ///< per device, events per second
    double horizon = 0;             ///< seconds
    std::vector<ConfigSpec> config_pool;  ///< empty: sample from the model
};

struct Outage {
    double from = 0;
    double to = 0;
};

struct Scenario {
    std::string name = "scenario";
    std::string model_document;
    std::string app_id = "app";
    std::vector<TestCase> suite;
    double lease_seconds = 600;
    double duration_sd = 2.5;
    std::uint64_t seed = 1;
    std::vector<DeviceSpec> devices;
    std::optional<Arrivals> arrivals;
    std::vector<SimEvent> events;
    std::vector<FaultRule> faults;
    std::vector<Outage> outages;
};

/// Parses a scenario; relative model paths resolve against `base_dir`.
/// Throws ScenarioError on anything malformed or undefined.
Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& file);

struct Interaction {
    double time = 0;
    std::string device;
    std::string endpoint;
    std::size_t request_bytes = 0;
    std::size_t response_bytes = 0;
    bool request_snapshot = false;
    bool response_snapshot = false;
    int status = 0;
};

struct TraceRecord {
    double time = 0;
    std::string device;
    std::string what;  ///< sandbox_open, execute, sandbox_close, ...
    std::string detail;
};

struct DeviceSummary {
    std::string id;
    std::size_t screen_locks = 0;
    std::size_t executions = 0;
    std::size_t messages = 0;
    std::size_t bytes_sent = 0;
    std::size_t bytes_received = 0;
    std::size_t unknown_reports = 0;
};

struct ConfigSummary {
    std::vector<FeatureId> config;  ///< frontier names
    std::uint64_t model_version = 0;
    double first_untested = 0;
    std::optional<double> tested_at;
    std::size_t executions = 0;
    bool failed = false;
};

struct DurationSummary {
    std::size_t n = 0;
    double mean = 0;
    double sd = 0;
    double error = 0;  ///< standard error of the mean
};

struct SimReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::uint64_t final_model_version = 0;
    std::size_t screen_locks = 0;
    std::size_t executions = 0;
    std::size_t accepted_results = 0;
    std::size_t rejected_results = 0;
    std::size_t duplicate_executions = 0;
    std::size_t duplicate_accepted = 0;
    std::size_t unknown_reports = 0;
    std::size_t unreachable = 0;
    std::size_t tested_count = 0;
    std::size_t max_non_snapshot_bytes = 0;
    DurationSummary durations;
    std::vector<DeviceSummary> devices;
    std::vector<ConfigSummary> configurations;
    std::vector<Interaction> interactions;
    std::vector<TraceRecord> trace;
    std::vector<double> execution_durations;
    Json server_report;

    bool payload_bound_holds() const { return max_non_snapshot_bytes <= protocol::kPayloadBound; }
};

DurationSummary summarize(const std::vector<double>& samples);

/// Runs the scenario deterministically; `seed` overrides the scenario seed.
SimReport run_simulation(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt);

Json to_json(const SimReport& report);
std::string devices_csv(const SimReport& report);
std::string configurations_csv(const SimReport& report);
std::string interactions_csv(const SimReport& report);
/// Mean / SD / Error table in the layout of the per-app duration summary.
std::string duration_table(const SimReport& report);
/// Writes report.json plus devices.csv, configurations.csv, interactions.csv.
void write_report(const SimReport& report, const std::filesystem::path& dir);

struct StressOptions {
    std::size_t devices = 32;
    std::size_t workers = 8;
    std::size_t configurations = 4;
    std::size_t rounds = 50;
    std::uint64_t seed = 1;
};

struct StressReport {
    std::size_t executions = 0;
    std::size_t accepted = 0;
    std::size_t duplicate_accepted = 0;
    std::size_t configurations_tested = 0;
    std::size_t configurations_seen = 0;
    bool tested_matches_passes = true;
};

/// Drives one server from concurrent workers through `dispatch`.
StressReport run_stress(const Scenario& scenario, const StressOptions& options);

}  // namespace invivo::sim
