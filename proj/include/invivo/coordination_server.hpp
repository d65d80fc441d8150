#pragma once

#include "invivo/feature_model.hpp"
#include "invivo/protocol.hpp"
#include "invivo/tested_store.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace invivo {

struct TestCase {
    std::string id;
    double nominal_duration = 3.0;  ///< seconds, simulation only
    std::string payload;            ///< opaque reference handed to the device
};

/// Seconds on whatever time line the caller uses (simulated or wall clock).
using Clock = std::function<double()>;

struct ServerOptions {
    std::string app_id = "app";
    std::vector<TestCase> suite;
    double lease_seconds = 600.0;
    /// Re-validate tested entries against a newly published model instead of
    /// starting from an empty tested set.
    bool migrate_on_publish = false;
    /// When set, state is loaded from and saved to `<dir>/state.json`.
    std::optional<std::filesystem::path> state_dir;
};

enum class TestState { Unassigned, Assigned, Passed, Failed };
const char* to_string(TestState state);

struct TestStatus {
    TestState state = TestState::Unassigned;
    std::string device;
    double lease_expiry = 0;
    std::string detail;
};

struct FailureRecord {
    std::vector<FeatureId> config;  ///< frontier names
    std::uint64_t model_version = 0;
    std::string test;
    std::string device;
    std::string detail;
    double time = 0;
};

struct UnknownEntry {
    std::vector<FeatureId> config;  ///< every reported name, sorted
    std::string reason_kind;
    std::string reason_detail;
    std::set<std::string> reporters;
    std::size_t reports = 0;
    double first_seen = 0;
    double last_seen = 0;
    std::uint64_t model_version = 0;
    bool reclassified_valid = false;
    /// First published model version under which the configuration is valid.
    std::optional<std::uint64_t> resolved_in_version;
};

struct DeviceRecord {
    std::uint64_t model_version = 0;
    std::uint64_t registrations = 0;
    double last_seen = 0;
};

/// Server side of the field-testing protocol.
///
/// Every handler takes and returns one JSON message (see protocol.hpp); all
/// of them run under one mutex, so ledger mutations are linearizable. The
/// server never blocks on test execution.
class CoordinationServer {
public:
    using Json = protocol::Json;

    CoordinationServer(FeatureModel model, ServerOptions options, Clock clock = {});
    /// Loads `<state_dir>/state.json`; throws std::runtime_error if it is missing or unreadable.
    static std::unique_ptr<CoordinationServer> load(const std::filesystem::path& state_dir, Clock clock = {});

    Json register_device(const Json& request);
    Json check_configuration(const Json& request);
    Json request_assignment(const Json& request);
    Json report_result(const Json& request);
    Json report_unknown(const Json& request);
    Json publish_model(const Json& request);
    Json report() const;
    std::string report_csv() const;

    // Inspection, mostly for tests and the simulator report.
    std::shared_ptr<const FeatureModel> model() const;
    TestedConfigStore tested() const;
    std::uint64_t tested_revision() const;
    std::vector<FailureRecord> failures() const;
    std::vector<UnknownEntry> unknown_inbox() const;
    std::map<std::string, DeviceRecord> devices() const;
    std::optional<std::vector<TestStatus>> progress(const CanonicalConfig& config) const;
    std::size_t progress_entries() const;
    const ServerOptions& options() const { return options_; }

    Json state_json() const;
    void save() const;

private:
    struct Progress {
        std::vector<TestStatus> tests;
    };

    double now() const;
    Json envelope(const std::string& device) const;
    /// Validates the common header; returns an error response or nullopt.
    std::optional<Json> check_header(const Json& request, bool need_registration, bool need_current_model);
    void persist();

    ServerOptions options_;
    Clock clock_;
    std::shared_ptr<const FeatureModel> model_;
    TestedConfigStore tested_;
    std::uint64_t tested_revision_ = 0;
    std::map<CanonicalConfig, Progress> progress_;
    std::vector<FailureRecord> failures_;
    std::vector<UnknownEntry> inbox_;
    std::map<std::string, DeviceRecord> devices_;
    mutable std::mutex mutex_;
};

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Routes one request to the server: the single place that maps endpoints,
/// parse errors and error codes to HTTP-style statuses. Used by the HTTP
/// frontend and by in-process transports alike.
HttpResponse dispatch(CoordinationServer& server, std::string_view method, std::string_view path,
                      std::string_view body, std::string_view query = {});

/// Blocking HTTP frontend; returns when `stop` is called from another thread.
class HttpFrontend {
public:
    explicit HttpFrontend(CoordinationServer& server);
    ~HttpFrontend();
    /// Binds and serves; returns false if the address cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it, or -1.
    int bind_any(const std::string& host);
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace invivo
