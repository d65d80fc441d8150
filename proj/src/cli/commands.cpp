#include "invivo/cli.hpp"

#include "invivo/configuration.hpp"
#include "invivo/counting.hpp"
#include "invivo/device_sim.hpp"
#include "invivo/pref_mapper.hpp"
#include "invivo/synthetic.hpp"
#include "invivo/tested_store.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

namespace invivo::cli {

using protocol::Json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot read " + path);
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw UsageError("cannot write " + path);
    }
}

FeatureModel load_model(const std::string& path) {
    try {
        return parse_model(read_file(path));
    } catch (const ModelError& e) {
        throw UsageError(path + ": " + e.what());
    }
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    return std::string(s.substr(first, s.find_last_not_of(" \t\r") - first + 1));
}

std::vector<Configuration> parse_tuples(const std::string& text) {
    std::vector<Configuration> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        std::vector<FeatureId> names;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            if (auto t = trim(field); !t.empty()) {
                names.push_back(std::move(t));
            }
        }
        if (!names.empty()) {
            out.emplace_back(std::move(names));
        }
    }
    return out;
}

TestedConfigStore load_tested(const FeatureModel& model, const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.rfind("IVTS", 0) == 0) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data());
        return TestedConfigStore::restore({p, bytes.size()}, model);
    }
    TestedConfigStore store(model);
    for (const Configuration& c : parse_tuples(bytes)) {
        store.insert(model, c);
    }
    return store;
}

std::string frontier_line(const FeatureModel& m, const CanonicalConfig& c) {
    std::string out;
    for (FeatureIndex i : frontier(m, c)) {
        out += (out.empty() ? "" : ", ") + m.feature(i).id;
    }
    return out;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

CommandOutcome failure(const std::string& message, bool json) {
    CommandOutcome o{kUsageError, {}, {}};
    if (json) {
        o.out = dump_json({{"schema", "invivo.error/1"}, {"error", message}});
    }
    o.err = "error: " + message + "\n";
    return o;
}

template <typename F>
CommandOutcome guarded(bool json, F&& body) {
    try {
        return body();
    } catch (const UsageError& e) {
        return failure(e.what(), json);
    } catch (const ModelError& e) {
        return failure(e.what(), json);
    } catch (const StoreError& e) {
        return failure(e.what(), json);
    } catch (const PreferenceSchemaError& e) {
        return failure(e.what(), json);
    } catch (const sim::ScenarioError& e) {
        return failure(e.what(), json);
    } catch (const Json::exception& e) {
        return failure(e.what(), json);
    } catch (const std::invalid_argument& e) {
        return failure(e.what(), json);
    }
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> seed, CommandOutcome& o) {
    if (seed) {
        return *seed;
    }
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    o.err += "seed: " + std::to_string(s) + "\n";
    return s;
}

Json verdict_json(const char* schema, const std::string& verdict, const std::optional<UnknownReason>& reason) {
    Json j{{"schema", schema}, {"verdict", verdict}};
    if (reason) {
        j["reason"] = {{"kind", to_string(reason->kind)}, {"detail", reason->detail}};
    }
    return j;
}

std::string verdict_text(const std::string& verdict, const std::optional<UnknownReason>& reason) {
    if (!reason) {
        return verdict + "\n";
    }
    return verdict + ": " + to_string(reason->kind) + ": " + reason->detail + "\n";
}

}  // namespace

CommandOutcome validate(const std::string& model_path, const std::string& config_path, bool json) {
    return guarded(json, [&] {
        const FeatureModel m = load_model(model_path);
        const Configuration c = parse_configuration(read_file(config_path));
        const ValidationResult r = validate_configuration(m, c);
        const std::string verdict = r.valid() ? "valid" : "unknown";
        CommandOutcome o{r.valid() ? kSuccess : kDomainFailure, {}, {}};
        o.out = json ? dump_json(verdict_json("invivo.validate/1", verdict, r.unknown)) : verdict_text(verdict, r.unknown);
        return o;
    });
}

CommandOutcome classify(const std::string& model_path, const std::string& tested_path, const std::string& config_path,
                        bool json) {
    return guarded(json, [&] {
        const FeatureModel m = load_model(model_path);
        const TestedConfigStore store = load_tested(m, tested_path);
        const Configuration c = parse_configuration(read_file(config_path));
        const Classification r = invivo::classify(m, store, c);
        const std::string verdict = to_string(r.verdict);
        CommandOutcome o{r.verdict == Verdict::Unknown ? kDomainFailure : kSuccess, {}, {}};
        o.out = json ? dump_json(verdict_json("invivo.classify/1", verdict, r.reason)) : verdict_text(verdict, r.reason);
        return o;
    });
}

CommandOutcome count(const std::string& model_path, bool json) {
    return guarded(json, [&] {
        const FeatureModel m = load_model(model_path);
        const BigCount n = count_configurations(m);
        const double lg = log10_count(n);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", lg);
        CommandOutcome o{n == 0 ? kDomainFailure : kSuccess, {}, {}};
        if (json) {
            Json j{{"schema", "invivo.count/1"}, {"model", m.name()}, {"version", m.version()}, {"count", n.str()}};
            j["log10"] = n == 0 ? Json(nullptr) : Json(lg);
            o.out = dump_json(j);
        } else {
            o.out = "count: " + n.str() + "\nlog10: " + (n == 0 ? std::string("-inf") : std::string(buf)) + "\n";
        }
        return o;
    });
}

CommandOutcome sample(const std::string& model_path, std::size_t n, std::optional<std::uint64_t> seed, bool json) {
    return guarded(json, [&] {
        const FeatureModel m = load_model(model_path);
        CommandOutcome o;
        const std::uint64_t s = resolve_seed(seed, o);
        std::optional<ConfigurationSampler> sampler;
        try {
            sampler.emplace(m);
        } catch (const UnsatisfiableModel& e) {
            o.exit_code = kDomainFailure;
            o.err += std::string("unsatisfiable: ") + e.what() + "\n";
            return o;
        }
        std::mt19937_64 rng(s);
        Json configs = Json::array();
        for (std::size_t i = 0; i < n; ++i) {
            const CanonicalConfig c = sampler->sample(rng);
            if (json) {
                Json names = Json::array();
                for (FeatureIndex f : frontier(m, c)) {
                    names.push_back(m.feature(f).id);
                }
                configs.push_back(std::move(names));
            } else {
                o.out += frontier_line(m, c) + "\n";
            }
        }
        if (json) {
            o.out = dump_json({{"schema", "invivo.sample/1"}, {"seed", s}, {"configurations", configs}});
        }
        return o;
    });
}

CommandOutcome map_prefs(const std::string& schema_path, const std::string& root,
                         const std::optional<std::string>& model_out, const std::optional<std::string>& report_out,
                         bool json) {
    return guarded(json, [&] {
        const MappingResult r = map_to_feature_model(parse_preference_schema(read_file(schema_path)), root);
        CommandOutcome o;
        if (model_out) {
            write_file(*model_out, r.document);
        }
        if (report_out) {
            write_file(*report_out, report_csv(r.report));
        }
        if (json) {
            o.out = report_json(r.report);
            if (o.out.empty() || o.out.back() != '\n') {
                o.out += '\n';
            }
        } else {
            o.out = model_out ? std::string{} : r.document;
            o.err = "mapped: " + report_summary(r.report) + "\n";
        }
        return o;
    });
}

CommandOutcome merge(const std::string& device_path, const std::string& app_path, const std::string& root,
                     const std::optional<std::string>& out, bool json) {
    return guarded(json, [&] {
        const FeatureModel merged = merge_models(load_model(device_path), load_model(app_path), root);
        const std::string doc = to_document(merged);
        CommandOutcome o;
        if (out) {
            write_file(*out, doc);
        }
        if (json) {
            o.out = dump_json({{"schema", "invivo.model/1"},
                               {"name", merged.name()},
                               {"version", merged.version()},
                               {"features", merged.size()},
                               {"document", doc}});
        } else if (!out) {
            o.out = doc;
        }
        return o;
    });
}

CommandOutcome tested_build(const std::string& model_path, const std::string& tuples_path, const std::string& out,
                            bool json) {
    return guarded(json, [&] {
        const FeatureModel m = load_model(model_path);
        TestedConfigStore store(m);
        CommandOutcome o;
        for (const Configuration& c : parse_tuples(read_file(tuples_path))) {
            const ValidationResult v = validate_configuration(m, c);
            if (!v.valid()) {
                o.exit_code = kDomainFailure;
                o.err += "rejected: " + verdict_text("unknown", v.unknown);
                continue;
            }
            store.insert(m, c);
        }
        const auto bytes = store.snapshot();
        write_file(out, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
        if (json) {
            o.out = dump_json(
                {{"schema", "invivo.tested/1"}, {"configurations", store.size()}, {"bytes", bytes.size()}, {"path", out}});
        } else {
            o.out = "wrote " + std::to_string(store.size()) + " configurations (" + std::to_string(bytes.size()) +
                    " bytes) to " + out + "\n";
        }
        return o;
    });
}

CommandOutcome tested_dump(const std::string& model_path, const std::string& snapshot_path, bool json) {
    return guarded(json, [&] {
        const FeatureModel m = load_model(model_path);
        const TestedConfigStore store = load_tested(m, snapshot_path);
        CommandOutcome o;
        if (json) {
            Json configs = Json::array();
            for (const CanonicalConfig& c : store.entries(m)) {
                Json names = Json::array();
                for (FeatureIndex f : frontier(m, c)) {
                    names.push_back(m.feature(f).id);
                }
                configs.push_back(std::move(names));
            }
            o.out = dump_json({{"schema", "invivo.tested/1"},
                               {"model_version", store.model_version()},
                               {"configurations", store.size()},
                               {"entries", configs}});
        } else {
            o.out = store.dump(m);
        }
        return o;
    });
}

CommandOutcome simulate(const SimulateOptions& options, bool json) {
    return guarded(json, [&] {
        const sim::Scenario sc = sim::load_scenario(options.scenario);
        CommandOutcome o;
        if (!options.seed) {
            o.err += "seed: " + std::to_string(sc.seed) + " (from scenario)\n";
        }
        if (options.stress) {
            sim::StressOptions so;
            so.devices = std::max<std::size_t>(sc.devices.size(), 1);
            so.workers = options.workers;
            so.seed = options.seed.value_or(sc.seed);
            const sim::StressReport r = sim::run_stress(sc, so);
            const bool ok = r.duplicate_accepted == 0 && r.tested_matches_passes;
            o.exit_code = ok ? kSuccess : kDomainFailure;
            const Json j{{"schema", "invivo.stress/1"},
                         {"executions", r.executions},
                         {"accepted", r.accepted},
                         {"duplicate_accepted", r.duplicate_accepted},
                         {"configurations_seen", r.configurations_seen},
                         {"configurations_tested", r.configurations_tested},
                         {"invariants_hold", ok}};
            o.out = json ? dump_json(j)
                         : "executions: " + std::to_string(r.executions) +
                               "\nduplicate accepted results: " + std::to_string(r.duplicate_accepted) +
                               "\nconfigurations tested: " + std::to_string(r.configurations_tested) + "/" +
                               std::to_string(r.configurations_seen) + "\ninvariants: " + (ok ? "hold" : "violated") +
                               "\n";
            return o;
        }
        const sim::SimReport r = sim::run_simulation(sc, options.seed);
        if (options.out_dir) {
            sim::write_report(r, *options.out_dir);
        }
        if (json) {
            o.out = dump_json(sim::to_json(r));
            return o;
        }
        std::ostringstream text;
        text << "scenario: " << r.scenario << "\nseed: " << r.seed << "\nscreen locks: " << r.screen_locks
             << "\nexecutions: " << r.executions << "\nduplicate executions: " << r.duplicate_executions
             << "\ntested configurations: " << r.tested_count << "\nfailures: " << r.server_report["failures"].size()
             << "\nunknown inbox: " << r.server_report["unknown"].size()
             << "\nmax non-snapshot message: " << r.max_non_snapshot_bytes << " bytes\n\n"
             << sim::duration_table(r);
        o.out = text.str();
        return o;
    });
}

CommandOutcome generate_model(const GenerateOptions& options, bool json) {
    return guarded(json, [&] {
        CommandOutcome o;
        SyntheticModelSpec spec;
        spec.name = options.name;
        spec.primitives = options.primitives;
        spec.compounds = options.compounds;
        spec.categories = options.categories;
        spec.constraints = options.constraints;
        spec.seed = resolve_seed(options.seed, o);
        const FeatureModel m = make_synthetic_model(spec);
        const std::string doc = to_document(m);
        if (options.out) {
            write_file(*options.out, doc);
        }
        if (json) {
            o.out = dump_json({{"schema", "invivo.model/1"},
                               {"name", m.name()},
                               {"version", m.version()},
                               {"features", m.size()},
                               {"document", doc}});
        } else if (!options.out) {
            o.out = doc;
        }
        return o;
    });
}

std::unique_ptr<CoordinationServer> open_server(const ServeOptions& options) {
    std::optional<std::string> dir = options.state_dir;
    if (!dir) {
        if (const char* env = std::getenv(kStateDirEnv); env && *env) {
            dir = env;
        }
    }
    if (!dir) {
        throw std::runtime_error(std::string("no state directory: pass --state-dir or set ") + kStateDirEnv);
    }
    if (std::filesystem::exists(std::filesystem::path(*dir) / "state.json")) {
        return CoordinationServer::load(*dir);
    }
    if (!options.model_path) {
        throw std::runtime_error("fresh state directory " + *dir + " needs --model");
    }
    ServerOptions so;
    so.app_id = options.app_id;
    for (std::size_t i = 1; i <= options.suite_size; ++i) {
        so.suite.push_back({"t" + std::to_string(i), 3.0, ""});
    }
    so.lease_seconds = options.lease_seconds;
    so.migrate_on_publish = options.migrate_on_publish;
    so.state_dir = *dir;
    FeatureModel m = [&] {
        try {
            return load_model(*options.model_path);
        } catch (const UsageError& e) {
            throw std::runtime_error(e.what());
        }
    }();
    auto server = std::make_unique<CoordinationServer>(std::move(m), std::move(so));
    server->save();
    return server;
}

}  // namespace invivo::cli
