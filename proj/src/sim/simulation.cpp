#include "invivo/counting.hpp"
#include "invivo/device_sim.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

namespace invivo::sim {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on raw draws, so sequences match across standard libraries.
double normal(std::mt19937_64& rng, double mean, double sd) {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double exponential(std::mt19937_64& rng, double rate) { return -std::log(1.0 - uniform01(rng)) / rate; }

struct Assignment {
    std::string test;
    double nominal = 0;
    double lease = 0;
};

struct Device {
    std::string id;
    bool present = false;
    bool registered = false;
    Configuration config;
    std::shared_ptr<const FeatureModel> model;
    std::uint64_t model_version = 0;
    std::optional<TestedConfigStore> tested;
    std::uint64_t revision = 0;
    bool pending = false;
    bool unknown = false;
    bool retry = false;
    bool sandbox = false;
    std::optional<Assignment> assignment;
    std::optional<Json> unsent_result;
    std::mt19937_64 rng;
    DeviceSummary stats;
};

struct Queued {
    double time;
    std::string device;
    std::uint64_t seq;
    SimEvent event;

    bool operator<(const Queued& o) const {
        return std::tie(time, device, seq) < std::tie(o.time, o.device, o.seq);
    }
};

using PairKey = std::tuple<std::uint64_t, std::vector<FeatureId>, std::string>;
using ConfigKey = std::pair<std::uint64_t, std::vector<FeatureId>>;

class Simulation {
public:
    Simulation(const Scenario& sc, std::uint64_t seed)
        : sc_(sc),
          seed_(seed),
          server_(parse_model(sc.model_document), server_options(sc), [this] { return now_; }) {
        for (std::size_t i = 0; i < sc.devices.size(); ++i) {
            Device d;
            d.id = sc.devices[i].id;
            d.rng.seed(seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
            d.stats.id = d.id;
            index_[d.id] = devices_.size();
            devices_.push_back(std::move(d));
        }
        schedule();
    }

    SimReport run() {
        while (!queue_.empty()) {
            Queued q = *queue_.begin();
            queue_.erase(queue_.begin());
            now_ = q.time;
            handle(q.event);
        }
        return finish();
    }

private:
    static ServerOptions server_options(const Scenario& sc) {
        ServerOptions o;
        o.app_id = sc.app_id;
        o.suite = sc.suite;
        o.lease_seconds = sc.lease_seconds;
        return o;
    }

    void push(SimEvent ev) {
        const double t = ev.time;
        std::string dev = ev.device;
        queue_.insert({t, std::move(dev), seq_++, std::move(ev)});
    }

    void schedule() {
        for (const DeviceSpec& d : sc_.devices) {
            push({d.join, EventKind::DeviceJoin, d.id, d.config, {}, false});
        }
        for (const SimEvent& e : sc_.events) {
            push(e);
        }
        if (!sc_.arrivals) {
            return;
        }
        const Arrivals& a = *sc_.arrivals;
        std::mt19937_64 rng(seed_ ^ 0xA5A5A5A5DEADBEEFULL);
        for (const DeviceSpec& d : sc_.devices) {
            if (a.screen_lock_rate > 0) {
                for (double t = d.join + exponential(rng, a.screen_lock_rate); t < a.horizon;
                     t += exponential(rng, a.screen_lock_rate)) {
                    push({t, EventKind::ScreenLock, d.id, std::nullopt, {}, false});
                }
            }
            if (a.config_change_rate > 0) {
                for (double t = d.join + exponential(rng, a.config_change_rate); t < a.horizon;
                     t += exponential(rng, a.config_change_rate)) {
                    ConfigSpec spec{true, {}};
                    if (!a.config_pool.empty()) {
                        spec = a.config_pool[rng() % a.config_pool.size()];
                    }
                    push({t, EventKind::ConfigChange, d.id, spec, {}, false});
                }
            }
        }
    }

    void trace(const Device& d, const char* what, std::string detail = {}) {
        report_.trace.push_back({now_, d.id, what, std::move(detail)});
    }

    bool unreachable() const {
        for (const Outage& o : sc_.outages) {
            if (now_ >= o.from && now_ < o.to) {
                return true;
            }
        }
        return false;
    }

    std::optional<Json> send(Device& d, const char* path, const Json& request) {
        if (unreachable()) {
            ++report_.unreachable;
            trace(d, "unreachable", path);
            return std::nullopt;
        }
        const std::string body = request.dump();
        const HttpResponse response = dispatch(server_, "POST", path, body);
        Json parsed = Json::parse(response.body);
        Interaction i{now_, d.id, path, body.size(), response.body.size(), protocol::carries_snapshot(request),
                      protocol::carries_snapshot(parsed), response.status};
        if (!i.request_snapshot) {
            report_.max_non_snapshot_bytes = std::max(report_.max_non_snapshot_bytes, i.request_bytes);
        }
        if (!i.response_snapshot) {
            report_.max_non_snapshot_bytes = std::max(report_.max_non_snapshot_bytes, i.response_bytes);
        }
        report_.interactions.push_back(i);
        ++d.stats.messages;
        d.stats.bytes_sent += i.request_bytes;
        d.stats.bytes_received += i.response_bytes;
        return parsed;
    }

    Json header(const Device& d) const {
        return Json{{"protocol", protocol::kVersion}, {"device", d.id}, {"model_version", d.model_version}};
    }

    static bool is_error(const Json& r, const char* code) {
        return r.value("status", "") == "error" && r.value("error", "") == code;
    }

    void adopt_tested(Device& d, const Json& r) {
        if (r.contains("tested")) {
            d.tested = TestedConfigStore::restore(protocol::base64_decode(r["tested"].get<std::string>()), *d.model);
        }
        if (r.contains("tested_revision")) {
            d.revision = r["tested_revision"].get<std::uint64_t>();
        }
    }

    /// Returns true when the device ended up with a new model.
    std::optional<bool> register_device(Device& d) {
        Json req = header(d);
        req["tested_revision"] = d.revision;
        const auto r = send(d, protocol::path::kRegister, req);
        if (!r) {
            d.retry = true;
            return std::nullopt;
        }
        bool changed = false;
        if (r->contains("model")) {
            d.model = std::make_shared<const FeatureModel>(parse_model((*r)["model"].get<std::string>()));
            d.model_version = d.model->version();
            d.tested.emplace(*d.model);
            d.assignment.reset();
            d.pending = false;
            d.unknown = false;
            changed = true;
        }
        adopt_tested(d, *r);
        d.registered = true;
        return changed;
    }

    Configuration resolve(Device& d, const ConfigSpec& spec) {
        if (!spec.sample) {
            return Configuration(spec.names);
        }
        const auto model = d.model ? d.model : server_.model();
        return sample_configuration(*model, d.rng());
    }

    ConfigSummary& config_summary(const FeatureModel& m, const CanonicalConfig& c) {
        std::vector<FeatureId> names;
        for (FeatureIndex i : frontier(m, c)) {
            names.push_back(m.feature(i).id);
        }
        ConfigKey key{m.version(), names};
        auto [it, created] = configs_.try_emplace(key);
        if (created) {
            it->second.config = names;
            it->second.model_version = m.version();
            it->second.first_untested = now_;
        }
        return it->second;
    }

    void resync(Device& d) {
        if (register_device(d).value_or(false)) {
            act(d);
        }
    }

    /// Local classification and the matching notification.
    void act(Device& d) {
        d.retry = false;
        if (!d.registered && !register_device(d)) {
            return;
        }
        if (d.config.empty()) {
            return;
        }
        const Classification cls = classify(*d.model, *d.tested, d.config);
        if (cls.verdict == Verdict::Tested) {
            d.pending = false;
            d.unknown = false;
            return;
        }
        if (cls.verdict == Verdict::Untested) {
            d.unknown = false;
            const CanonicalConfig c = *canonicalize(*d.model, d.config);
            Json req = header(d);
            req["config"] = protocol::encode_config(*d.model, c);
            const auto r = send(d, protocol::path::kCheck, req);
            if (!r) {
                d.retry = true;
                return;
            }
            if (is_error(*r, protocol::error::kStaleModel)) {
                resync(d);
                return;
            }
            if (r->value("status", "") == "already_tested") {
                adopt_tested(d, *r);
                d.pending = false;
            } else if (r->value("status", "") == "still_untested") {
                d.pending = true;
                config_summary(*d.model, c);
            }
            return;
        }
        std::vector<FeatureIndex> known;
        std::vector<FeatureId> unrecognized;
        for (const auto& name : d.config.selected()) {
            if (const auto i = d.model->index_of(name)) {
                known.push_back(*i);
            } else {
                unrecognized.push_back(name);
            }
        }
        Json req = header(d);
        req["known"] = protocol::encode_config(*d.model, close_indices(*d.model, known));
        req["unrecognized"] = unrecognized;
        req["reason"] = {{"kind", to_string(cls.reason->kind)}, {"detail", cls.reason->detail}};
        const auto r = send(d, protocol::path::kUnknown, req);
        if (!r) {
            d.retry = true;
            return;
        }
        if (is_error(*r, protocol::error::kStaleModel)) {
            resync(d);
            return;
        }
        d.unknown = true;
        d.pending = false;
        ++d.stats.unknown_reports;
        ++report_.unknown_reports;
    }

    void fetch_assignment(Device& d) {
        const CanonicalConfig c = *canonicalize(*d.model, d.config);
        Json req = header(d);
        req["config"] = protocol::encode_config(*d.model, c);
        const auto r = send(d, protocol::path::kAssignment, req);
        if (!r) {
            return;
        }
        if (is_error(*r, protocol::error::kStaleModel)) {
            resync(d);
            return;
        }
        if (is_error(*r, protocol::error::kNoLedgerEntry)) {
            act(d);
            return;
        }
        if (r->value("status", "") == "assigned") {
            const Json& t = (*r)["test"];
            d.assignment = Assignment{t["id"].get<std::string>(), t["nominal_duration"].get<double>(),
                                      (*r)["lease_expires"].get<double>()};
            trace(d, "assigned", d.assignment->test);
        } else if (r->value("config_tested", false) || r->value("config_failed", false)) {
            d.pending = false;
        }
    }

    bool fails(const CanonicalConfig& c, const FeatureModel& m, const std::string& test, std::string* detail) const {
        for (const FaultRule& f : sc_.faults) {
            if (f.test != test) {
                continue;
            }
            const bool all = std::all_of(f.when.begin(), f.when.end(), [&](const FeatureId& id) {
                const auto i = m.index_of(id);
                return i && std::binary_search(c.features.begin(), c.features.end(), *i);
            });
            if (all) {
                *detail = f.detail;
                return true;
            }
        }
        return false;
    }

    void deliver_result(Device& d) {
        const auto r = send(d, protocol::path::kResult, *d.unsent_result);
        if (!r) {
            return;
        }
        const Json sent = *std::exchange(d.unsent_result, std::nullopt);
        if (is_error(*r, protocol::error::kStaleModel)) {
            resync(d);
            return;
        }
        if (r->value("status", "") != "accepted") {
            ++report_.rejected_results;
            trace(d, "result_rejected", r->value("reason", ""));
            return;
        }
        ++report_.accepted_results;
        const CanonicalConfig c = protocol::decode_config(*d.model, sent["config"]);
        ConfigSummary& s = config_summary(*d.model, c);
        ++accepted_[{d.model_version, s.config, sent["test"].get<std::string>()}];
        if (sent["verdict"] == "failed") {
            s.failed = true;
        }
        if (r->value("config_tested", false)) {
            s.tested_at = now_;
        }
    }

    void execute(Device& d) {
        const Assignment a = *std::exchange(d.assignment, std::nullopt);
        const CanonicalConfig c = *canonicalize(*d.model, d.config);
        trace(d, "sandbox_open");
        d.sandbox = true;
        std::string detail;
        const bool failed = fails(c, *d.model, a.test, &detail);
        const double duration = std::max(0.0, normal(d.rng, a.nominal, sc_.duration_sd));
        trace(d, "execute", a.test + (failed ? " failed" : " passed"));
        report_.execution_durations.push_back(duration);
        ++report_.executions;
        ++d.stats.executions;
        ConfigSummary& s = config_summary(*d.model, c);
        ++s.executions;
        ++executed_[{d.model_version, s.config, a.test}];
        d.sandbox = false;
        trace(d, "sandbox_close");

        Json req = header(d);
        req["config"] = protocol::encode_config(*d.model, c);
        req["test"] = a.test;
        req["verdict"] = failed ? "failed" : "passed";
        if (failed) {
            req["detail"] = detail;
        }
        d.unsent_result = std::move(req);
        deliver_result(d);
    }

    void screen_lock(Device& d) {
        ++d.stats.screen_locks;
        ++report_.screen_locks;
        if (d.unsent_result) {
            deliver_result(d);
        }
        if (d.retry) {
            act(d);
        } else if (d.unknown) {
            resync(d);
        }
        if (d.assignment && now_ >= d.assignment->lease) {
            trace(d, "lease_dropped", d.assignment->test);
            d.assignment.reset();
        }
        if (!d.assignment && d.pending) {
            fetch_assignment(d);
        }
        if (d.assignment) {
            execute(d);
            if (d.pending) {
                fetch_assignment(d);
            }
        }
    }

    void handle(const SimEvent& ev) {
        if (ev.kind == EventKind::ModelPublish) {
            Json req{{"protocol", protocol::kVersion}, {"document", ev.document}, {"migrate", ev.migrate}};
            const HttpResponse r = dispatch(server_, "POST", protocol::path::kModel, req.dump());
            report_.interactions.push_back(
                {now_, "operator", protocol::path::kModel, req.dump().size(), r.body.size(), true, false, r.status});
            report_.trace.push_back({now_, "operator", "publish", Json::parse(r.body).value("status", "")});
            return;
        }
        Device& d = devices_[index_.at(ev.device)];
        switch (ev.kind) {
            case EventKind::DeviceJoin:
                if (d.present) {
                    return;
                }
                d.present = true;
                trace(d, "join");
                if (ev.config) {
                    d.config = resolve(d, *ev.config);
                }
                act(d);
                return;
            case EventKind::DeviceLeave:
                d.present = false;
                trace(d, "leave");
                return;
            case EventKind::ConfigChange:
                if (!d.present) {
                    return;
                }
                d.config = resolve(d, *ev.config);
                d.assignment.reset();
                d.pending = false;
                d.unknown = false;
                act(d);
                return;
            case EventKind::ScreenLock:
                if (d.present) {
                    screen_lock(d);
                }
                return;
            case EventKind::ModelPublish:
                return;
        }
    }

    SimReport finish() {
        report_.scenario = sc_.name;
        report_.seed = seed_;
        report_.final_model_version = server_.model()->version();
        report_.tested_count = server_.tested().size();
        report_.durations = summarize(report_.execution_durations);
        for (const auto& [key, n] : executed_) {
            report_.duplicate_executions += n - 1;
        }
        for (const auto& [key, n] : accepted_) {
            report_.duplicate_accepted += n - 1;
        }
        for (const Device& d : devices_) {
            report_.devices.push_back(d.stats);
        }
        for (auto& [key, s] : configs_) {
            report_.configurations.push_back(s);
        }
        report_.server_report = server_.report();
        return std::move(report_);
    }

    const Scenario& sc_;
    std::uint64_t seed_;
    double now_ = 0;
    CoordinationServer server_;
    std::vector<Device> devices_;
    std::map<std::string, std::size_t> index_;
    std::set<Queued> queue_;
    std::uint64_t seq_ = 0;
    std::map<PairKey, std::size_t> executed_;
    std::map<PairKey, std::size_t> accepted_;
    std::map<ConfigKey, ConfigSummary> configs_;
    SimReport report_;
};

}  // namespace

DurationSummary summarize(const std::vector<double>& samples) {
    DurationSummary s;
    s.n = samples.size();
    if (s.n == 0) {
        return s;
    }
    double sum = 0;
    for (double x : samples) {
        sum += x;
    }
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double sq = 0;
        for (double x : samples) {
            sq += (x - s.mean) * (x - s.mean);
        }
        s.sd = std::sqrt(sq / static_cast<double>(s.n - 1));
        s.error = s.sd / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

SimReport run_simulation(const Scenario& scenario, std::optional<std::uint64_t> seed) {
    Simulation sim(scenario, seed.value_or(scenario.seed));
    return sim.run();
}

}  // namespace invivo::sim
