#include "invivo/device_sim.hpp"
#include "invivo/synthetic.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace invivo::sim {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::ConfigChange: return "config_change";
        case EventKind::ScreenLock: return "screen_lock";
        case EventKind::DeviceJoin: return "join";
        case EventKind::DeviceLeave: return "leave";
        case EventKind::ModelPublish: return "publish";
    }
    return "?";
}

namespace {

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ScenarioError("cannot read " + file.string());
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string model_document(const Json& spec, const std::filesystem::path& base) {
    if (spec.is_string()) {
        return read_file(base / spec.get<std::string>());
    }
    if (spec.is_object() && spec.contains("document")) {
        return spec.at("document").get<std::string>();
    }
    if (spec.is_object() && spec.contains("synthetic")) {
        const Json& s = spec.at("synthetic");
        SyntheticModelSpec m;
        m.name = s.value("name", m.name);
        m.primitives = s.value("primitives", m.primitives);
        m.compounds = s.value("compounds", m.compounds);
        m.categories = s.value("categories", m.categories);
        m.constraints = s.value("constraints", m.constraints);
        m.seed = s.value("seed", m.seed);
        return to_document(make_synthetic_model(m));
    }
    throw ScenarioError("model must be a path, {\"document\": ...} or {\"synthetic\": ...}");
}

ConfigSpec config_spec(const Json& j) {
    if (j.is_string() && j.get<std::string>() == "sample") {
        return {true, {}};
    }
    if (j.is_array()) {
        return {false, j.get<std::vector<FeatureId>>()};
    }
    throw ScenarioError("configuration must be a list of feature names or \"sample\"");
}

EventKind event_kind(const std::string& s) {
    for (EventKind k : {EventKind::ConfigChange, EventKind::ScreenLock, EventKind::DeviceJoin, EventKind::DeviceLeave,
                        EventKind::ModelPublish}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ScenarioError("unknown event kind '" + s + "'");
}

}  // namespace

Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir) {
    Scenario sc;
    try {
        sc.name = doc.value("name", sc.name);
        if (!doc.contains("model")) {
            throw ScenarioError("scenario has no model");
        }
        sc.model_document = model_document(doc.at("model"), base_dir);
        sc.app_id = doc.value("app", sc.app_id);
        if (!doc.contains("suite")) {
            throw ScenarioError("scenario has no suite for app '" + sc.app_id + "'");
        }
        const Json& suite = doc.at("suite");
        if (suite.is_array()) {
            for (const auto& t : suite) {
                sc.suite.push_back({t.at("id").get<std::string>(), t.value("nominal_duration", 3.0),
                                    t.value("payload", std::string{})});
            }
        } else {
            const auto n = suite.at("size").get<std::size_t>();
            const double nominal = suite.value("nominal_duration", 3.0);
            for (std::size_t i = 1; i <= n; ++i) {
                sc.suite.push_back({"t" + std::to_string(i), nominal, ""});
            }
        }
        if (sc.suite.empty()) {
            throw ScenarioError("suite for app '" + sc.app_id + "' is empty");
        }
        sc.lease_seconds = doc.value("lease_seconds", sc.lease_seconds);
        if (doc.contains("durations")) {
            sc.duration_sd = doc.at("durations").value("sd", sc.duration_sd);
        }
        sc.seed = doc.value("seed", sc.seed);

        if (doc.contains("fleet")) {
            const Json& f = doc.at("fleet");
            const auto size = f.at("size").get<std::size_t>();
            const std::string prefix = f.value("prefix", std::string("dev-"));
            std::optional<ConfigSpec> config;
            if (f.contains("config")) {
                config = config_spec(f.at("config"));
            }
            const double join = f.value("join", 0.0);
            for (std::size_t i = 0; i < size; ++i) {
                char buf[24];
                std::snprintf(buf, sizeof buf, "%04zu", i + 1);
                sc.devices.push_back({prefix + buf, config, join});
            }
        }
        for (const auto& d : doc.value("devices", Json::array())) {
            DeviceSpec spec{d.at("id").get<std::string>(), std::nullopt, d.value("join", 0.0)};
            if (d.contains("config")) {
                spec.config = config_spec(d.at("config"));
            }
            sc.devices.push_back(std::move(spec));
        }
        std::set<std::string> ids;
        for (const auto& d : sc.devices) {
            if (!protocol::is_valid_device_id(d.id) || !ids.insert(d.id).second) {
                throw ScenarioError("bad or duplicate device id '" + d.id + "'");
            }
        }

        if (doc.contains("arrivals")) {
            const Json& a = doc.at("arrivals");
            Arrivals arr;
            arr.screen_lock_rate = a.value("screen_lock_rate", 0.0);
            arr.config_change_rate = a.value("config_change_rate", 0.0);
            arr.horizon = a.at("horizon").get<double>();
            for (const auto& c : a.value("config_pool", Json::array())) {
                arr.config_pool.push_back(config_spec(c));
            }
            if (arr.screen_lock_rate < 0 || arr.config_change_rate < 0 || arr.horizon < 0) {
                throw ScenarioError("arrival rates and horizon must be non-negative");
            }
            sc.arrivals = std::move(arr);
        }

        for (const auto& e : doc.value("events", Json::array())) {
            SimEvent ev;
            ev.time = e.at("time").get<double>();
            ev.kind = event_kind(e.at("kind").get<std::string>());
            if (ev.kind == EventKind::ModelPublish) {
                ev.document = model_document(e.at("model"), base_dir);
                ev.migrate = e.value("migrate", false);
            } else {
                ev.device = e.at("device").get<std::string>();
                if (!ids.count(ev.device)) {
                    throw ScenarioError("event for undefined device '" + ev.device + "'");
                }
            }
            if (ev.kind == EventKind::ConfigChange) {
                ev.config = config_spec(e.at("config"));
            }
            sc.events.push_back(std::move(ev));
        }

        std::set<std::string> tests;
        for (const auto& t : sc.suite) {
            tests.insert(t.id);
        }
        for (const auto& f : doc.value("faults", Json::array())) {
            FaultRule rule{f.at("test").get<std::string>(), f.value("when", std::vector<FeatureId>{}),
                           f.value("detail", std::string("injected failure"))};
            if (!tests.count(rule.test)) {
                throw ScenarioError("fault for undefined test '" + rule.test + "'");
            }
            sc.faults.push_back(std::move(rule));
        }
        for (const auto& o : doc.value("outages", Json::array())) {
            sc.outages.push_back({o.at("from").get<double>(), o.at("to").get<double>()});
        }
        parse_model(sc.model_document);
    } catch (const Json::exception& e) {
        throw ScenarioError(std::string("malformed scenario: ") + e.what());
    } catch (const ModelError& e) {
        throw ScenarioError(std::string("scenario model: ") + e.what());
    }
    return sc;
}

Scenario load_scenario(const std::filesystem::path& file) {
    Json doc;
    try {
        doc = Json::parse(read_file(file));
    } catch (const Json::parse_error& e) {
        throw ScenarioError(file.string() + ": " + e.what());
    }
    return parse_scenario(doc, file.parent_path());
}

}  // namespace invivo::sim
