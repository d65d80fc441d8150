#include "invivo/device_sim.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace invivo::sim {

namespace {

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string joined(const std::vector<FeatureId>& names) {
    std::string out;
    for (const auto& n : names) {
        out += (out.empty() ? "" : ";") + n;
    }
    return out;
}

void write_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
}

}  // namespace

Json to_json(const SimReport& r) {
    Json out{{"schema", "invivo.sim-report/1"},
             {"scenario", r.scenario},
             {"seed", r.seed},
             {"final_model_version", r.final_model_version}};
    out["totals"] = {{"screen_locks", r.screen_locks},
                     {"executions", r.executions},
                     {"accepted_results", r.accepted_results},
                     {"rejected_results", r.rejected_results},
                     {"duplicate_executions", r.duplicate_executions},
                     {"duplicate_accepted", r.duplicate_accepted},
                     {"unknown_reports", r.unknown_reports},
                     {"unreachable", r.unreachable},
                     {"tested_count", r.tested_count},
                     {"messages", r.interactions.size()},
                     {"max_non_snapshot_bytes", r.max_non_snapshot_bytes},
                     {"payload_bound", protocol::kPayloadBound},
                     {"payload_bound_holds", r.payload_bound_holds()}};
    out["durations"] = {{"n", r.durations.n},
                        {"mean", r.durations.mean},
                        {"sd", r.durations.sd},
                        {"error", r.durations.error}};
    Json devices = Json::array();
    for (const DeviceSummary& d : r.devices) {
        devices.push_back({{"id", d.id},
                           {"screen_locks", d.screen_locks},
                           {"executions", d.executions},
                           {"messages", d.messages},
                           {"bytes_sent", d.bytes_sent},
                           {"bytes_received", d.bytes_received},
                           {"unknown_reports", d.unknown_reports}});
    }
    out["devices"] = std::move(devices);
    Json configs = Json::array();
    for (const ConfigSummary& c : r.configurations) {
        Json j{{"config", c.config},
               {"model_version", c.model_version},
               {"first_untested", c.first_untested},
               {"tested_at", c.tested_at ? Json(*c.tested_at) : Json(nullptr)},
               {"time_to_tested", c.tested_at ? Json(*c.tested_at - c.first_untested) : Json(nullptr)},
               {"executions", c.executions},
               {"failed", c.failed}};
        configs.push_back(std::move(j));
    }
    out["configurations"] = std::move(configs);
    Json interactions = Json::array();
    for (const Interaction& i : r.interactions) {
        interactions.push_back({{"time", i.time},
                                {"device", i.device},
                                {"endpoint", i.endpoint},
                                {"request_bytes", i.request_bytes},
                                {"response_bytes", i.response_bytes},
                                {"snapshot", i.request_snapshot || i.response_snapshot},
                                {"status", i.status}});
    }
    out["interactions"] = std::move(interactions);
    Json trace = Json::array();
    for (const TraceRecord& t : r.trace) {
        trace.push_back({{"time", t.time}, {"device", t.device}, {"what", t.what}, {"detail", t.detail}});
    }
    out["trace"] = std::move(trace);
    out["server"] = r.server_report;
    return out;
}

std::string devices_csv(const SimReport& r) {
    std::ostringstream out;
    out << "device,screen_locks,executions,messages,bytes_sent,bytes_received,unknown_reports\n";
    for (const DeviceSummary& d : r.devices) {
        out << d.id << ',' << d.screen_locks << ',' << d.executions << ',' << d.messages << ',' << d.bytes_sent << ','
            << d.bytes_received << ',' << d.unknown_reports << '\n';
    }
    return out.str();
}

std::string configurations_csv(const SimReport& r) {
    std::ostringstream out;
    out << "model_version,config,first_untested,tested_at,time_to_tested,executions,failed\n";
    for (const ConfigSummary& c : r.configurations) {
        out << c.model_version << ',' << joined(c.config) << ',' << fixed(c.first_untested) << ','
            << (c.tested_at ? fixed(*c.tested_at) : "") << ','
            << (c.tested_at ? fixed(*c.tested_at - c.first_untested) : "") << ',' << c.executions << ','
            << (c.failed ? "true" : "false") << '\n';
    }
    return out.str();
}

std::string interactions_csv(const SimReport& r) {
    std::ostringstream out;
    out << "time,device,endpoint,request_bytes,response_bytes,snapshot,status\n";
    for (const Interaction& i : r.interactions) {
        out << fixed(i.time) << ',' << i.device << ',' << i.endpoint << ',' << i.request_bytes << ','
            << i.response_bytes << ',' << (i.request_snapshot || i.response_snapshot ? "true" : "false") << ','
            << i.status << '\n';
    }
    return out.str();
}

std::string duration_table(const SimReport& r) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "%-20s %8s %10s %10s %10s\n", "Scenario", "Tests", "Mean (s)", "SD (s)",
                  "Error (s)");
    out += line;
    std::snprintf(line, sizeof line, "%-20s %8zu %10.3f %10.3f %10.3f\n", r.scenario.substr(0, 20).c_str(),
                  r.durations.n, r.durations.mean, r.durations.sd, r.durations.error);
    out += line;
    return out;
}

void write_report(const SimReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", to_json(r).dump(1) + "\n");
    write_file(dir / "devices.csv", devices_csv(r));
    write_file(dir / "configurations.csv", configurations_csv(r));
    write_file(dir / "interactions.csv", interactions_csv(r));
    write_file(dir / "durations.txt", duration_table(r));
}

}  // namespace invivo::sim
