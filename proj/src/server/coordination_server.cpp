#include "invivo/coordination_server.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace invivo {

using protocol::Json;
namespace err = protocol::error;

const char* to_string(TestState state) {
    switch (state) {
        case TestState::Unassigned: return "unassigned";
        case TestState::Assigned: return "assigned";
        case TestState::Passed: return "passed";
        case TestState::Failed: return "failed";
    }
    return "?";
}

namespace {

std::optional<TestState> parse_test_state(const std::string& s) {
    for (TestState t : {TestState::Unassigned, TestState::Assigned, TestState::Passed, TestState::Failed}) {
        if (s == to_string(t)) {
            return t;
        }
    }
    return std::nullopt;
}

Clock wall_clock() {
    const auto start = std::chrono::steady_clock::now();
    return [start] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
}

std::vector<FeatureId> frontier_names(const FeatureModel& model, const CanonicalConfig& c) {
    std::vector<FeatureId> out;
    for (FeatureIndex i : frontier(model, c)) {
        out.push_back(model.feature(i).id);
    }
    return out;
}

bool is_valid_canonical(const FeatureModel& model, const CanonicalConfig& c) {
    std::vector<char> mask(model.size(), 0);
    for (FeatureIndex i : c.features) {
        mask[i] = 1;
    }
    return !find_violation(model, mask).has_value();
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (const auto& p : parts) {
        out += (out.empty() ? "" : sep) + p;
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? "\"\"" : std::string(1, c);
    }
    return out + "\"";
}

Json suite_json(const std::vector<TestCase>& suite) {
    Json out = Json::array();
    for (const TestCase& t : suite) {
        out.push_back({{"id", t.id}, {"nominal_duration", t.nominal_duration}, {"payload", t.payload}});
    }
    return out;
}

}  // namespace

CoordinationServer::CoordinationServer(FeatureModel model, ServerOptions options, Clock clock)
    : options_(std::move(options)),
      clock_(clock ? std::move(clock) : wall_clock()),
      model_(std::make_shared<const FeatureModel>(std::move(model))),
      tested_(*model_) {
    if (options_.suite.empty()) {
        throw std::invalid_argument("test suite for '" + options_.app_id + "' is empty");
    }
    std::set<std::string> ids;
    for (const TestCase& t : options_.suite) {
        if (t.id.empty() || !ids.insert(t.id).second) {
            throw std::invalid_argument("test ids must be unique and non-empty");
        }
    }
    if (!(options_.lease_seconds > 0)) {
        throw std::invalid_argument("lease must be positive");
    }
}

double CoordinationServer::now() const { return clock_(); }

Json CoordinationServer::envelope(const std::string& device) const {
    return Json{{"protocol", protocol::kVersion}, {"device", device}, {"model_version", model_->version()}};
}

std::optional<Json> CoordinationServer::check_header(const Json& request, bool need_registration,
                                                     bool need_current_model) {
    if (!request.is_object()) {
        return protocol::error_response(err::kMalformed, "request must be a JSON object");
    }
    if (!request.contains("protocol") || request["protocol"] != protocol::kVersion) {
        return protocol::error_response(err::kProtocol, "expected protocol version 1");
    }
    if (!request.contains("device") || !request["device"].is_string() ||
        !protocol::is_valid_device_id(request["device"].get<std::string>())) {
        return protocol::error_response(err::kBadDevice, "device id must match [A-Za-z0-9._:-]{1,64}");
    }
    const std::string device = request["device"];
    auto it = devices_.find(device);
    if (need_registration && it == devices_.end()) {
        return protocol::error_response(err::kUnregistered, "device '" + device + "' is not registered");
    }
    if (it != devices_.end()) {
        it->second.last_seen = now();
    }
    if (need_current_model) {
        const auto held = request.value("model_version", std::uint64_t{0});
        if (held != model_->version()) {
            Json e = protocol::error_response(err::kStaleModel, "model version " + std::to_string(held) +
                                                                     " is not current");
            e["model_version"] = model_->version();
            return e;
        }
    }
    return std::nullopt;
}

Json CoordinationServer::register_device(const Json& request) {
    std::lock_guard lock(mutex_);
    if (auto e = check_header(request, false, false)) {
        return *e;
    }
    const std::string device = request["device"];
    const auto held_model = request.value("model_version", std::uint64_t{0});
    const auto held_revision = request.value("tested_revision", std::uint64_t{0});

    DeviceRecord& rec = devices_[device];
    ++rec.registrations;
    rec.last_seen = now();
    rec.model_version = model_->version();

    Json out = envelope(device);
    out["status"] = "ok";
    out["tested_revision"] = tested_revision_;
    if (held_model != model_->version()) {
        out["model"] = to_document(*model_);
    }
    if (held_model != model_->version() || held_revision != tested_revision_) {
        out["tested"] = protocol::base64_encode(tested_.snapshot());
    }
    persist();
    return out;
}

Json CoordinationServer::check_configuration(const Json& request) {
    std::lock_guard lock(mutex_);
    if (auto e = check_header(request, true, true)) {
        return *e;
    }
    const std::string device = request["device"];
    CanonicalConfig config;
    try {
        config = protocol::decode_config(*model_, request.at("config"));
    } catch (const std::exception& e) {
        return protocol::error_response(err::kMalformed, e.what());
    }
    if (!is_valid_canonical(*model_, config)) {
        return protocol::error_response(err::kUnknownConfig, "configuration is not valid under model version " +
                                                                 std::to_string(model_->version()));
    }
    Json out = envelope(device);
    out["tested_revision"] = tested_revision_;
    if (tested_.contains(*model_, config)) {
        out["status"] = "already_tested";
        out["tested"] = protocol::base64_encode(tested_.snapshot());
        return out;
    }
    const auto [it, created] = progress_.try_emplace(config);
    if (created) {
        it->second.tests.resize(options_.suite.size());
        persist();
    }
    out["status"] = "still_untested";
    return out;
}

Json CoordinationServer::request_assignment(const Json& request) {
    std::lock_guard lock(mutex_);
    if (auto e = check_header(request, true, true)) {
        return *e;
    }
    const std::string device = request["device"];
    CanonicalConfig config;
    try {
        config = protocol::decode_config(*model_, request.at("config"));
    } catch (const std::exception& e) {
        return protocol::error_response(err::kMalformed, e.what());
    }
    Json out = envelope(device);
    if (tested_.contains(*model_, config)) {
        out["status"] = "nothing_to_run";
        out["config_tested"] = true;
        out["config_failed"] = false;
        return out;
    }
    auto it = progress_.find(config);
    if (it == progress_.end()) {
        return protocol::error_response(err::kNoLedgerEntry, "configuration was never checked");
    }
    auto& tests = it->second.tests;
    const double t = now();
    auto assigned = [&](std::size_t k) {
        out["status"] = "assigned";
        out["test"] = {{"id", options_.suite[k].id},
                       {"position", k + 1},
                       {"nominal_duration", options_.suite[k].nominal_duration},
                       {"payload", options_.suite[k].payload}};
        out["lease_expires"] = tests[k].lease_expiry;
        return out;
    };
    for (std::size_t k = 0; k < tests.size(); ++k) {
        if (tests[k].state == TestState::Assigned && tests[k].device == device && t < tests[k].lease_expiry) {
            return assigned(k);
        }
    }
    for (std::size_t k = 0; k < tests.size(); ++k) {
        const bool expired = tests[k].state == TestState::Assigned && t >= tests[k].lease_expiry;
        if (tests[k].state == TestState::Unassigned || expired) {
            tests[k].state = TestState::Assigned;
            tests[k].device = device;
            tests[k].lease_expiry = t + options_.lease_seconds;
            persist();
            return assigned(k);
        }
    }
    out["status"] = "nothing_to_run";
    out["config_tested"] = false;
    out["config_failed"] = std::any_of(tests.begin(), tests.end(),
                                       [](const TestStatus& s) { return s.state == TestState::Failed; });
    return out;
}

Json CoordinationServer::report_result(const Json& request) {
    std::lock_guard lock(mutex_);
    if (auto e = check_header(request, true, true)) {
        return *e;
    }
    const std::string device = request["device"];
    CanonicalConfig config;
    std::string test_id;
    std::string verdict;
    try {
        config = protocol::decode_config(*model_, request.at("config"));
        test_id = request.at("test").get<std::string>();
        verdict = request.at("verdict").get<std::string>();
    } catch (const std::exception& e) {
        return protocol::error_response(err::kMalformed, e.what());
    }
    if (verdict != "passed" && verdict != "failed") {
        return protocol::error_response(err::kMalformed, "verdict must be 'passed' or 'failed'");
    }
    Json out = envelope(device);
    auto reject = [&](const char* reason) {
        out["status"] = "rejected";
        out["reason"] = reason;
        return out;
    };
    auto it = progress_.find(config);
    if (it == progress_.end()) {
        return reject("not_assigned");
    }
    auto& tests = it->second.tests;
    const auto pos = std::find_if(options_.suite.begin(), options_.suite.end(),
                                  [&](const TestCase& t) { return t.id == test_id; });
    if (pos == options_.suite.end()) {
        return reject("unknown_test");
    }
    TestStatus& status = tests[static_cast<std::size_t>(pos - options_.suite.begin())];
    if (status.state != TestState::Assigned) {
        return reject(status.state == TestState::Unassigned ? "not_assigned" : "already_final");
    }
    if (status.device != device) {
        return reject("foreign_assignment");
    }
    if (now() >= status.lease_expiry) {
        return reject("lease_expired");
    }
    bool became_tested = false;
    if (verdict == "passed") {
        status.state = TestState::Passed;
        if (std::all_of(tests.begin(), tests.end(), [](const TestStatus& s) { return s.state == TestState::Passed; })) {
            tested_.insert(*model_, config);
            ++tested_revision_;
            became_tested = true;
        }
    } else {
        status.state = TestState::Failed;
        status.detail = request.value("detail", std::string{});
        failures_.push_back({frontier_names(*model_, config), model_->version(), test_id, device, status.detail, now()});
    }
    persist();
    out["status"] = "accepted";
    out["config_tested"] = became_tested;
    out["tested_revision"] = tested_revision_;
    return out;
}

Json CoordinationServer::report_unknown(const Json& request) {
    std::lock_guard lock(mutex_);
    if (auto e = check_header(request, true, true)) {
        return *e;
    }
    const std::string device = request["device"];
    std::vector<FeatureId> names;
    std::vector<FeatureId> unrecognized;
    std::string kind;
    std::string detail;
    CanonicalConfig known;
    try {
        known = protocol::decode_config(*model_, request.value("known", Json::array()));
        for (const auto& n : request.value("unrecognized", Json::array())) {
            unrecognized.push_back(n.get<std::string>());
        }
        const Json reason = request.value("reason", Json::object());
        kind = reason.value("kind", std::string{});
        detail = reason.value("detail", std::string{});
    } catch (const std::exception& e) {
        return protocol::error_response(err::kMalformed, e.what());
    }
    names = frontier_names(*model_, known);
    names.insert(names.end(), unrecognized.begin(), unrecognized.end());
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());

    auto it = std::find_if(inbox_.begin(), inbox_.end(), [&](const UnknownEntry& e) { return e.config == names; });
    if (it == inbox_.end()) {
        UnknownEntry entry;
        entry.config = names;
        entry.reason_kind = kind;
        entry.reason_detail = detail;
        entry.first_seen = now();
        entry.model_version = model_->version();
        entry.reclassified_valid = unrecognized.empty() && is_valid_canonical(*model_, known);
        inbox_.push_back(std::move(entry));
        it = inbox_.end() - 1;
    }
    it->reporters.insert(device);
    ++it->reports;
    it->last_seen = now();
    persist();

    Json out = envelope(device);
    out["status"] = "recorded";
    out["reporters"] = it->reporters.size();
    out["reclassified_valid"] = it->reclassified_valid;
    return out;
}

Json CoordinationServer::publish_model(const Json& request) {
    std::lock_guard lock(mutex_);
    if (!request.is_object() || request.value("protocol", 0) != protocol::kVersion) {
        return protocol::error_response(err::kProtocol, "expected protocol version 1");
    }
    if (!request.contains("document") || !request["document"].is_string()) {
        return protocol::error_response(err::kMalformed, "missing model document");
    }
    std::optional<FeatureModel> next;
    try {
        next.emplace(parse_model(request["document"].get<std::string>()));
    } catch (const ModelError& e) {
        return protocol::error_response(err::kBadModel, e.what());
    }
    if (next->version() <= model_->version()) {
        return protocol::error_response(err::kVersionNotIncreasing,
                                        "model version " + std::to_string(next->version()) +
                                            " does not exceed current version " + std::to_string(model_->version()));
    }
    const bool migrate = request.value("migrate", options_.migrate_on_publish);
    auto fresh = std::make_shared<const FeatureModel>(std::move(*next));
    tested_ = migrate ? TestedConfigStore::migrate(tested_, *model_, *fresh) : TestedConfigStore(*fresh);
    model_ = std::move(fresh);
    ++tested_revision_;
    progress_.clear();
    for (UnknownEntry& e : inbox_) {
        if (!e.resolved_in_version && validate_configuration(*model_, Configuration(e.config)).valid()) {
            e.resolved_in_version = model_->version();
        }
    }
    persist();
    return Json{{"protocol", protocol::kVersion},
                {"status", "published"},
                {"model_version", model_->version()},
                {"tested_count", tested_.size()},
                {"migrated", migrate}};
}

Json CoordinationServer::report() const {
    std::lock_guard lock(mutex_);
    Json out{{"schema", "invivo.server-report/1"},
             {"protocol", protocol::kVersion},
             {"app", options_.app_id},
             {"model_version", model_->version()},
             {"tested_count", tested_.size()},
             {"tested_revision", tested_revision_},
             {"devices", devices_.size()},
             {"open_configurations", progress_.size()}};
    Json failures = Json::array();
    for (const FailureRecord& f : failures_) {
        failures.push_back({{"config", f.config},
                            {"model_version", f.model_version},
                            {"test", f.test},
                            {"device", f.device},
                            {"detail", f.detail},
                            {"time", f.time}});
    }
    out["failures"] = std::move(failures);
    Json unknown = Json::array();
    for (const UnknownEntry& e : inbox_) {
        Json j{{"config", e.config},
               {"reason", {{"kind", e.reason_kind}, {"detail", e.reason_detail}}},
               {"reporters", e.reporters.size()},
               {"reports", e.reports},
               {"first_seen", e.first_seen},
               {"last_seen", e.last_seen},
               {"model_version", e.model_version},
               {"reclassified_valid", e.reclassified_valid}};
        j["resolved_in_version"] = e.resolved_in_version ? Json(*e.resolved_in_version) : Json(nullptr);
        unknown.push_back(std::move(j));
    }
    out["unknown"] = std::move(unknown);
    return out;
}

std::string CoordinationServer::report_csv() const {
    std::lock_guard lock(mutex_);
    std::ostringstream out;
    out << "kind,config,test,device,reporters,detail\n";
    for (const FailureRecord& f : failures_) {
        out << "failure," << csv_field(join(f.config, ";")) << ',' << csv_field(f.test) << ',' << f.device << ",,"
            << csv_field(f.detail) << '\n';
    }
    for (const UnknownEntry& e : inbox_) {
        out << "unknown," << csv_field(join(e.config, ";")) << ",,," << e.reporters.size() << ','
            << csv_field(e.reason_kind + (e.reason_detail.empty() ? "" : ": " + e.reason_detail)) << '\n';
    }
    return out.str();
}

std::shared_ptr<const FeatureModel> CoordinationServer::model() const {
    std::lock_guard lock(mutex_);
    return model_;
}

TestedConfigStore CoordinationServer::tested() const {
    std::lock_guard lock(mutex_);
    return tested_;
}

std::uint64_t CoordinationServer::tested_revision() const {
    std::lock_guard lock(mutex_);
    return tested_revision_;
}

std::vector<FailureRecord> CoordinationServer::failures() const {
    std::lock_guard lock(mutex_);
    return failures_;
}

std::vector<UnknownEntry> CoordinationServer::unknown_inbox() const {
    std::lock_guard lock(mutex_);
    return inbox_;
}

std::map<std::string, DeviceRecord> CoordinationServer::devices() const {
    std::lock_guard lock(mutex_);
    return devices_;
}

std::optional<std::vector<TestStatus>> CoordinationServer::progress(const CanonicalConfig& config) const {
    std::lock_guard lock(mutex_);
    auto it = progress_.find(config);
    if (it == progress_.end()) {
        return std::nullopt;
    }
    return it->second.tests;
}

std::size_t CoordinationServer::progress_entries() const {
    std::lock_guard lock(mutex_);
    return progress_.size();
}

// --- persistence -----------------------------------------------------------

Json CoordinationServer::state_json() const {
    Json s{{"schema", "invivo.server-state/1"},
           {"app", options_.app_id},
           {"suite", suite_json(options_.suite)},
           {"lease_seconds", options_.lease_seconds},
           {"migrate_on_publish", options_.migrate_on_publish},
           {"model", to_document(*model_)},
           {"tested", protocol::base64_encode(tested_.snapshot())},
           {"tested_revision", tested_revision_}};
    Json progress = Json::array();
    for (const auto& [config, p] : progress_) {
        Json tests = Json::array();
        for (const TestStatus& t : p.tests) {
            tests.push_back({{"state", to_string(t.state)},
                             {"device", t.device},
                             {"lease_expiry", t.lease_expiry},
                             {"detail", t.detail}});
        }
        progress.push_back({{"config", frontier_names(*model_, config)}, {"tests", std::move(tests)}});
    }
    s["progress"] = std::move(progress);
    Json failures = Json::array();
    for (const FailureRecord& f : failures_) {
        failures.push_back({{"config", f.config},
                            {"model_version", f.model_version},
                            {"test", f.test},
                            {"device", f.device},
                            {"detail", f.detail},
                            {"time", f.time}});
    }
    s["failures"] = std::move(failures);
    Json inbox = Json::array();
    for (const UnknownEntry& e : inbox_) {
        inbox.push_back({{"config", e.config},
                         {"reason_kind", e.reason_kind},
                         {"reason_detail", e.reason_detail},
                         {"reporters", e.reporters},
                         {"reports", e.reports},
                         {"first_seen", e.first_seen},
                         {"last_seen", e.last_seen},
                         {"model_version", e.model_version},
                         {"reclassified_valid", e.reclassified_valid},
                         {"resolved_in_version",
                          e.resolved_in_version ? Json(*e.resolved_in_version) : Json(nullptr)}});
    }
    s["unknown"] = std::move(inbox);
    Json devices = Json::object();
    for (const auto& [id, d] : devices_) {
        devices[id] = {{"model_version", d.model_version}, {"registrations", d.registrations}, {"last_seen", d.last_seen}};
    }
    s["devices"] = std::move(devices);
    return s;
}

void CoordinationServer::persist() {
    if (!options_.state_dir) {
        return;
    }
    const auto dir = *options_.state_dir;
    std::filesystem::create_directories(dir);
    const auto tmp = dir / "state.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << state_json().dump(1) << '\n';
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, dir / "state.json");
}

void CoordinationServer::save() const {
    std::lock_guard lock(mutex_);
    const_cast<CoordinationServer*>(this)->persist();
}

std::unique_ptr<CoordinationServer> CoordinationServer::load(const std::filesystem::path& state_dir, Clock clock) {
    const auto file = state_dir / "state.json";
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::runtime_error("no server state at " + file.string());
    }
    Json s;
    try {
        s = Json::parse(in);
        ServerOptions options;
        options.app_id = s.at("app").get<std::string>();
        for (const auto& t : s.at("suite")) {
            options.suite.push_back(
                {t.at("id").get<std::string>(), t.at("nominal_duration").get<double>(), t.at("payload").get<std::string>()});
        }
        options.lease_seconds = s.at("lease_seconds").get<double>();
        options.migrate_on_publish = s.at("migrate_on_publish").get<bool>();
        options.state_dir = state_dir;

        auto server = std::make_unique<CoordinationServer>(parse_model(s.at("model").get<std::string>()),
                                                           std::move(options), std::move(clock));
        const FeatureModel& m = *server->model_;
        server->tested_ =
            TestedConfigStore::restore(protocol::base64_decode(s.at("tested").get<std::string>()), m);
        server->tested_revision_ = s.at("tested_revision").get<std::uint64_t>();
        for (const auto& p : s.at("progress")) {
            const auto canonical = canonicalize(m, Configuration(p.at("config").get<std::vector<std::string>>()));
            if (!canonical) {
                throw std::runtime_error("progress entry names an unknown feature");
            }
            Progress progress;
            for (const auto& t : p.at("tests")) {
                const auto state = parse_test_state(t.at("state").get<std::string>());
                if (!state) {
                    throw std::runtime_error("bad test state");
                }
                progress.tests.push_back({*state, t.at("device").get<std::string>(), t.at("lease_expiry").get<double>(),
                                          t.at("detail").get<std::string>()});
            }
            if (progress.tests.size() != server->options_.suite.size()) {
                throw std::runtime_error("progress entry does not match the suite");
            }
            server->progress_.emplace(*canonical, std::move(progress));
        }
        for (const auto& f : s.at("failures")) {
            server->failures_.push_back({f.at("config").get<std::vector<std::string>>(),
                                         f.at("model_version").get<std::uint64_t>(), f.at("test").get<std::string>(),
                                         f.at("device").get<std::string>(), f.at("detail").get<std::string>(),
                                         f.at("time").get<double>()});
        }
        for (const auto& e : s.at("unknown")) {
            UnknownEntry entry;
            entry.config = e.at("config").get<std::vector<std::string>>();
            entry.reason_kind = e.at("reason_kind").get<std::string>();
            entry.reason_detail = e.at("reason_detail").get<std::string>();
            entry.reporters = e.at("reporters").get<std::set<std::string>>();
            entry.reports = e.at("reports").get<std::size_t>();
            entry.first_seen = e.at("first_seen").get<double>();
            entry.last_seen = e.at("last_seen").get<double>();
            entry.model_version = e.at("model_version").get<std::uint64_t>();
            entry.reclassified_valid = e.at("reclassified_valid").get<bool>();
            if (!e.at("resolved_in_version").is_null()) {
                entry.resolved_in_version = e.at("resolved_in_version").get<std::uint64_t>();
            }
            server->inbox_.push_back(std::move(entry));
        }
        for (const auto& [id, d] : s.at("devices").items()) {
            server->devices_[id] = {d.at("model_version").get<std::uint64_t>(),
                                    d.at("registrations").get<std::uint64_t>(), d.at("last_seen").get<double>()};
        }
        return server;
    } catch (const Json::exception& e) {
        throw std::runtime_error("corrupt server state " + file.string() + ": " + e.what());
    } catch (const ModelError& e) {
        throw std::runtime_error("corrupt server state " + file.string() + ": " + e.what());
    } catch (const StoreError& e) {
        throw std::runtime_error("corrupt server state " + file.string() + ": " + e.what());
    }
}

// --- routing ---------------------------------------------------------------

namespace {

int status_for(const Json& response) {
    if (response.value("status", "") != "error") {
        return 200;
    }
    const std::string code = response.value("error", "");
    if (code == err::kUnregistered) return 403;
    if (code == err::kStaleModel || code == err::kNoLedgerEntry || code == err::kVersionNotIncreasing) return 409;
    if (code == err::kUnknownConfig) return 422;
    if (code == err::kNotImplemented) return 501;
    if (code == err::kNotFound) return 404;
    return 400;
}

}  // namespace

HttpResponse dispatch(CoordinationServer& server, std::string_view method, std::string_view path,
                      std::string_view body, std::string_view query) {
    auto respond = [](const Json& j) { return HttpResponse{status_for(j), j.dump(), "application/json"}; };
    if (path == protocol::path::kReport) {
        if (method != "GET") {
            return {405, protocol::error_response(err::kMalformed, "use GET").dump()};
        }
        if (query.find("format=csv") != std::string_view::npos) {
            return {200, server.report_csv(), "text/csv"};
        }
        return respond(server.report());
    }
    if (path == protocol::path::kExVivo) {
        return respond(protocol::error_response(err::kNotImplemented, "ex-vivo execution is not implemented"));
    }
    using Handler = Json (CoordinationServer::*)(const Json&);
    static const std::map<std::string_view, Handler> routes{
        {protocol::path::kRegister, &CoordinationServer::register_device},
        {protocol::path::kCheck, &CoordinationServer::check_configuration},
        {protocol::path::kAssignment, &CoordinationServer::request_assignment},
        {protocol::path::kResult, &CoordinationServer::report_result},
        {protocol::path::kUnknown, &CoordinationServer::report_unknown},
        {protocol::path::kModel, &CoordinationServer::publish_model},
    };
    const auto route = routes.find(path);
    if (route == routes.end()) {
        return respond(protocol::error_response(err::kNotFound, "no endpoint " + std::string(path)));
    }
    if (method != "POST") {
        return {405, protocol::error_response(err::kMalformed, "use POST").dump()};
    }
    Json request;
    try {
        request = Json::parse(body);
    } catch (const Json::parse_error& e) {
        return respond(protocol::error_response(err::kMalformed, e.what()));
    }
    return respond((server.*(route->second))(request));
}

}  // namespace invivo
