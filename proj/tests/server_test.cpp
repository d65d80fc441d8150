#include "fixtures.hpp"

#include "invivo/coordination_server.hpp"
#include "invivo/counting.hpp"
#include "invivo/synthetic.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

using namespace invivo;
using protocol::Json;

namespace {

struct ManualClock {
    std::shared_ptr<double> t = std::make_shared<double>(0.0);
    Clock clock() const {
        return [t = t] { return *t; };
    }
    void advance(double s) const { *t += s; }
};

std::vector<TestCase> suite(int n) {
    std::vector<TestCase> out;
    for (int i = 1; i <= n; ++i) {
        out.push_back({"t" + std::to_string(i), 3.0, "espresso://chat/" + std::to_string(i)});
    }
    return out;
}

ServerOptions options(int tests = 5) {
    ServerOptions o;
    o.app_id = "chatapp";
    o.suite = suite(tests);
    return o;
}

class Harness {
public:
    explicit Harness(FeatureModel m = fixtures::chatapp(), ServerOptions o = options())
        : server(std::move(m), std::move(o), clock.clock()) {}

    Json msg(const std::string& device, Json extra = Json::object()) {
        Json j{{"protocol", 1}, {"device", device}, {"model_version", server.model()->version()}};
        for (auto& [k, v] : extra.items()) {
            j[k] = v;
        }
        return j;
    }

    Json wire(const Configuration& c) {
        const auto canon = canonicalize(*server.model(), c);
        EXPECT_TRUE(canon.has_value());
        return protocol::encode_config(*server.model(), *canon);
    }

    CanonicalConfig canon(const Configuration& c) { return *canonicalize(*server.model(), c); }

    void join(const std::string& device) { ASSERT_EQ(server.register_device(msg(device))["status"], "ok"); }

    Json check(const std::string& device, const Configuration& c) {
        return server.check_configuration(msg(device, {{"config", wire(c)}}));
    }
    Json assign(const std::string& device, const Configuration& c) {
        return server.request_assignment(msg(device, {{"config", wire(c)}}));
    }
    Json result(const std::string& device, const Configuration& c, const std::string& test, bool pass,
                const std::string& detail = {}) {
        return server.report_result(msg(
            device, {{"config", wire(c)}, {"test", test}, {"verdict", pass ? "passed" : "failed"}, {"detail", detail}}));
    }

    ManualClock clock;
    CoordinationServer server;
};

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("invivo_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Server, FreshDeviceGetsModelAndSnapshot) {
    Harness h;
    const Json r = h.server.register_device({{"protocol", 1}, {"device", "dev-1"}, {"model_version", 0}});
    EXPECT_EQ(r["status"], "ok");
    ASSERT_TRUE(r.contains("model"));
    ASSERT_TRUE(r.contains("tested"));
    EXPECT_EQ(parse_model(r["model"].get<std::string>()), *h.server.model());
    const auto bytes = protocol::base64_decode(r["tested"].get<std::string>());
    EXPECT_EQ(TestedConfigStore::restore(bytes, *h.server.model()).size(), 0u);
}

TEST(Server, CurrentDeviceGetsEmptyDelta) {
    Harness h;
    const Json r = h.server.register_device(h.msg("dev-1", {{"tested_revision", 0}}));
    EXPECT_FALSE(r.contains("model"));
    EXPECT_FALSE(r.contains("tested"));
}

TEST(Server, MalformedDeviceIdRejected) {
    Harness h;
    for (const std::string& id : std::vector<std::string>{"", "has space", std::string(65, 'a'), "slash/id"}) {
        const Json r = h.server.register_device({{"protocol", 1}, {"device", id}, {"model_version", 1}});
        EXPECT_EQ(r["error"], protocol::error::kBadDevice) << id;
    }
    EXPECT_EQ(h.server.register_device({{"protocol", 2}, {"device", "d"}})["error"], protocol::error::kProtocol);
    EXPECT_TRUE(h.server.devices().empty());
}

TEST(Server, ThousandRegistrationsGiveThousandEntries) {
    Harness h;
    for (int i = 0; i < 1000; ++i) {
        h.join("dev-" + std::to_string(i));
    }
    h.join("dev-7");
    EXPECT_EQ(h.server.devices().size(), 1000u);
    EXPECT_EQ(h.server.devices().at("dev-7").registrations, 2u);
}

TEST(Server, UnregisteredDeviceRejected) {
    Harness h;
    EXPECT_EQ(h.check("ghost", fixtures::sony_tuple())["error"], protocol::error::kUnregistered);
}

TEST(Server, FirstCheckIsStillUntestedAndCreatesLedger) {
    Harness h;
    h.join("a");
    EXPECT_EQ(h.check("a", fixtures::sony_tuple())["status"], "still_untested");
    EXPECT_EQ(h.server.progress_entries(), 1u);
    const auto p = h.server.progress(h.canon(fixtures::sony_tuple()));
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->size(), 5u);
}

TEST(Server, UnknownConfigurationRejectedByCheck) {
    Harness h;
    h.join("a");
    // SonyCamera on LG hardware violates a cross-tree constraint.
    Configuration bad{"DeviceConfig.OS.N", "DeviceConfig.DeviceModel.LG", "DeviceConfig.CameraApp.Default.SonyCamera",
                      "AppPrefs.Upload.OnWifi", "AppPrefs.Backup.No"};
    const CanonicalConfig c = *canonicalize(*h.server.model(), bad);
    const Json r = h.server.check_configuration(h.msg("a", {{"config", protocol::encode_config(*h.server.model(), c)}}));
    EXPECT_EQ(r["error"], protocol::error::kUnknownConfig);
    EXPECT_EQ(h.server.progress_entries(), 0u);
}

TEST(Server, StaleModelVersionRejected) {
    Harness h;
    h.join("a");
    Json m = h.msg("a", {{"config", h.wire(fixtures::sony_tuple())}});
    m["model_version"] = 0;
    const Json r = h.server.check_configuration(m);
    EXPECT_EQ(r["error"], protocol::error::kStaleModel);
    EXPECT_EQ(r["model_version"], 1);
}

TEST(Server, TestsAssignedInOrder) {
    Harness h;
    h.join("a");
    h.check("a", fixtures::sony_tuple());
    const Json r = h.assign("a", fixtures::sony_tuple());
    EXPECT_EQ(r["status"], "assigned");
    EXPECT_EQ(r["test"]["id"], "t1");
    EXPECT_EQ(r["test"]["position"], 1);
    EXPECT_DOUBLE_EQ(r["lease_expires"].get<double>(), 600.0);
}

TEST(Server, AssignmentWithoutLedgerEntryRejected) {
    Harness h;
    h.join("a");
    EXPECT_EQ(h.assign("a", fixtures::sony_tuple())["error"], protocol::error::kNoLedgerEntry);
}

TEST(Server, RepeatedRequestReturnsHeldAssignment) {
    Harness h;
    h.join("a");
    h.check("a", fixtures::sony_tuple());
    EXPECT_EQ(h.assign("a", fixtures::sony_tuple())["test"]["id"], "t1");
    EXPECT_EQ(h.assign("a", fixtures::sony_tuple())["test"]["id"], "t1");
}

TEST(Server, FiveDevicesGetFiveDistinctTests) {
    Harness h;
    std::set<std::string> ids;
    for (int d = 0; d < 5; ++d) {
        const std::string dev = "d" + std::to_string(d);
        h.join(dev);
        EXPECT_EQ(h.check(dev, fixtures::sony_tuple())["status"], "still_untested");
        ids.insert(h.assign(dev, fixtures::sony_tuple())["test"]["id"].get<std::string>());
    }
    EXPECT_EQ(ids.size(), 5u);
    h.join("late");
    const Json r = h.assign("late", fixtures::sony_tuple());
    EXPECT_EQ(r["status"], "nothing_to_run");
    EXPECT_EQ(r["config_tested"], false);
    EXPECT_EQ(h.server.progress_entries(), 1u);
}

TEST(Server, LastPassMakesConfigurationTested) {
    Harness h;
    const auto sony = fixtures::sony_tuple();
    h.join("a");
    h.check("a", sony);
    for (int i = 1; i <= 5; ++i) {
        const Json a = h.assign("a", sony);
        ASSERT_EQ(a["test"]["id"], "t" + std::to_string(i));
        const Json r = h.result("a", sony, a["test"]["id"], true);
        EXPECT_EQ(r["status"], "accepted");
        EXPECT_EQ(r["config_tested"], i == 5);
    }
    EXPECT_TRUE(h.server.tested().contains(*h.server.model(), sony));
    EXPECT_EQ(h.server.tested_revision(), 1u);
    EXPECT_EQ(h.assign("a", sony)["status"], "nothing_to_run");

    h.join("b");
    const Json again = h.check("b", sony);
    EXPECT_EQ(again["status"], "already_tested");
    const auto store =
        TestedConfigStore::restore(protocol::base64_decode(again["tested"].get<std::string>()), *h.server.model());
    EXPECT_TRUE(store.contains(*h.server.model(), sony));
}

TEST(Server, FailedTestKeepsConfigurationOutOfStore) {
    Harness h;
    const auto sony = fixtures::sony_tuple();
    h.join("a");
    h.check("a", sony);
    for (int i = 1; i <= 5; ++i) {
        const Json a = h.assign("a", sony);
        h.result("a", sony, a["test"]["id"], i != 3, i == 3 ? "camera preview froze" : "");
    }
    EXPECT_FALSE(h.server.tested().contains(*h.server.model(), sony));
    const Json n = h.assign("a", sony);
    EXPECT_EQ(n["status"], "nothing_to_run");
    EXPECT_EQ(n["config_failed"], true);
    ASSERT_EQ(h.server.failures().size(), 1u);
    const FailureRecord f = h.server.failures()[0];
    EXPECT_EQ(f.device, "a");
    EXPECT_EQ(f.test, "t3");
    EXPECT_EQ(f.detail, "camera preview froze");
    const Json report = h.server.report();
    EXPECT_EQ(report["failures"][0]["test"], "t3");
    EXPECT_NE(h.server.report_csv().find("failure,"), std::string::npos);
}

TEST(Server, ResultsForeignOrUnassignedRejected) {
    Harness h;
    const auto sony = fixtures::sony_tuple();
    h.join("a");
    h.join("b");
    h.check("a", sony);
    EXPECT_EQ(h.result("a", sony, "t1", true)["reason"], "not_assigned");
    h.assign("a", sony);
    EXPECT_EQ(h.result("b", sony, "t1", true)["reason"], "foreign_assignment");
    EXPECT_EQ(h.result("a", sony, "t9", true)["reason"], "unknown_test");
    EXPECT_EQ(h.result("a", sony, "t1", true)["status"], "accepted");
    EXPECT_EQ(h.result("a", sony, "t1", true)["reason"], "already_final");
    EXPECT_EQ(h.server.progress(h.canon(sony))->at(0).state, TestState::Passed);
}

TEST(Server, ExpiredLeaseIsReassignedAndLateResultRejected) {
    Harness h;
    const auto sony = fixtures::sony_tuple();
    h.join("a");
    h.join("b");
    h.check("a", sony);
    EXPECT_EQ(h.assign("a", sony)["test"]["id"], "t1");
    h.clock.advance(601);
    EXPECT_EQ(h.result("a", sony, "t1", true)["reason"], "lease_expired");
    EXPECT_EQ(h.assign("b", sony)["test"]["id"], "t1");
    EXPECT_EQ(h.result("a", sony, "t1", true)["reason"], "foreign_assignment");
    EXPECT_EQ(h.result("b", sony, "t1", true)["status"], "accepted");
}

TEST(Server, UnknownReportsDeduplicated) {
    Harness h;
    const FeatureModel& m = *h.server.model();
    std::vector<std::string> unrecognized;
    std::vector<FeatureId> known;
    const Configuration xiaomi = fixtures::xiaomi_tuple();
    for (const auto& id : xiaomi.selected()) {
        (m.index_of(id) ? known : unrecognized).push_back(id);
    }
    const Json known_wire = protocol::encode_config(m, *canonicalize(m, Configuration(known)));
    for (int d = 0; d < 50; ++d) {
        const std::string dev = "x" + std::to_string(d);
        h.join(dev);
        Json r = h.server.report_unknown(
            h.msg(dev, {{"known", known_wire},
                        {"unrecognized", unrecognized},
                        {"reason", {{"kind", "unrecognized_feature"}, {"detail", unrecognized.front()}}}}));
        EXPECT_EQ(r["status"], "recorded");
        EXPECT_EQ(r["reporters"], d + 1);
    }
    h.server.report_unknown(h.msg("x0", {{"known", known_wire}, {"unrecognized", unrecognized}}));
    const auto inbox = h.server.unknown_inbox();
    ASSERT_EQ(inbox.size(), 1u);
    EXPECT_EQ(inbox[0].reporters.size(), 50u);
    EXPECT_EQ(inbox[0].reports, 51u);
    EXPECT_FALSE(inbox[0].reclassified_valid);
}

TEST(Server, ValidConfigurationInInboxIsFlagged) {
    Harness h;
    h.join("a");
    const Json r = h.server.report_unknown(h.msg("a", {{"known", h.wire(fixtures::sony_tuple())}}));
    EXPECT_EQ(r["reclassified_valid"], true);
}

TEST(Server, PublishRequiresIncreasingVersion) {
    Harness h;
    const Json same = h.server.publish_model({{"protocol", 1}, {"document", fixtures::read("chatapp.fm")}});
    EXPECT_EQ(same["error"], protocol::error::kVersionNotIncreasing);
    const Json broken = h.server.publish_model({{"protocol", 1}, {"document", "model X v9\nfeature"}});
    EXPECT_EQ(broken["error"], protocol::error::kBadModel);
    EXPECT_EQ(h.server.model()->version(), 1u);
}

TEST(Server, PublishReclassifiesXiaomiAndStaleDeviceGetsModel) {
    Harness h;
    h.join("a");
    const FeatureModel& v1 = *h.server.model();
    std::vector<std::string> unrecognized;
    std::vector<FeatureId> known;
    const Configuration xiaomi = fixtures::xiaomi_tuple();
    for (const auto& id : xiaomi.selected()) {
        (v1.index_of(id) ? known : unrecognized).push_back(id);
    }
    h.server.report_unknown(
        h.msg("a", {{"known", protocol::encode_config(v1, *canonicalize(v1, Configuration(known)))},
                    {"unrecognized", unrecognized}}));

    const Json p = h.server.publish_model({{"protocol", 1}, {"document", fixtures::read("chatapp_xiaomi.fm")}});
    ASSERT_EQ(p["status"], "published");
    EXPECT_EQ(h.server.model()->version(), 2u);
    EXPECT_EQ(h.server.unknown_inbox()[0].resolved_in_version, 2u);

    const Json stale = h.server.check_configuration(
        {{"protocol", 1}, {"device", "a"}, {"model_version", 1}, {"config", Json::array({0})}});
    EXPECT_EQ(stale["error"], protocol::error::kStaleModel);
    const Json reg = h.server.register_device({{"protocol", 1}, {"device", "a"}, {"model_version", 1}});
    ASSERT_TRUE(reg.contains("model"));
    EXPECT_EQ(parse_model(reg["model"].get<std::string>()).version(), 2u);
    EXPECT_EQ(h.check("a", fixtures::xiaomi_tuple())["status"], "still_untested");
}

TEST(Server, PublishResetsOrMigratesTestedSet) {
    for (bool migrate : {false, true}) {
        Harness h;
        const auto lg = fixtures::tested_tuple('N');
        h.join("a");
        h.check("a", lg);
        for (int i = 0; i < 5; ++i) {
            h.result("a", lg, h.assign("a", lg)["test"]["id"], true);
        }
        h.check("a", fixtures::sony_tuple());
        ASSERT_EQ(h.server.tested().size(), 1u);
        const auto before = h.server.tested_revision();
        h.server.publish_model({{"protocol", 1}, {"document", fixtures::read("chatapp_xiaomi.fm")}, {"migrate", migrate}});
        EXPECT_EQ(h.server.tested().size(), migrate ? 1u : 0u);
        EXPECT_GT(h.server.tested_revision(), before);
        EXPECT_EQ(h.server.progress_entries(), 0u);
    }
}

TEST(Server, FailuresSurvivePublish) {
    Harness h;
    const auto sony = fixtures::sony_tuple();
    h.join("a");
    h.check("a", sony);
    h.result("a", sony, h.assign("a", sony)["test"]["id"], false, "boom");
    h.server.publish_model({{"protocol", 1}, {"document", fixtures::read("chatapp_xiaomi.fm")}});
    EXPECT_EQ(h.server.failures().size(), 1u);
    EXPECT_EQ(h.server.failures()[0].model_version, 1u);
}

TEST(Server, StatePersistsAcrossRestart) {
    const auto dir = temp_dir("persist");
    ServerOptions o = options();
    o.state_dir = dir;
    ManualClock clock;
    const auto sony = fixtures::sony_tuple();
    const auto lg = fixtures::tested_tuple('O');
    std::string before;
    {
        Harness h(fixtures::chatapp(), o);
        h.join("a");
        h.check("a", lg);
        for (int i = 0; i < 5; ++i) {
            h.result("a", lg, h.assign("a", lg)["test"]["id"], true);
        }
        h.check("a", sony);
        h.assign("a", sony);
        h.result("a", sony, "t1", false, "crash");
        h.server.report_unknown(h.msg("a", {{"known", Json::array({0})}, {"unrecognized", {"Foo"}}}));
        before = h.server.state_json().dump();
    }
    ASSERT_TRUE(std::filesystem::exists(dir / "state.json"));
    EXPECT_FALSE(std::filesystem::exists(dir / "state.json.tmp"));
    const auto loaded = CoordinationServer::load(dir, clock.clock());
    EXPECT_EQ(loaded->state_json().dump(), before);
    EXPECT_TRUE(loaded->tested().contains(*loaded->model(), lg));
    EXPECT_EQ(loaded->failures().size(), 1u);
    std::filesystem::remove_all(dir);
}

TEST(Server, LoadRejectsMissingOrCorruptState) {
    const auto dir = temp_dir("corrupt");
    EXPECT_THROW(CoordinationServer::load(dir), std::runtime_error);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "state.json") << "{\"schema\": 1";
    EXPECT_THROW(CoordinationServer::load(dir), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST(Server, RacingDevicesShareOneLedgerEntryAndNeverDuplicate) {
    Harness h(fixtures::chatapp(), options(5));
    const auto sony = fixtures::sony_tuple();
    constexpr int kDevices = 16;
    for (int d = 0; d < kDevices; ++d) {
        h.join("d" + std::to_string(d));
    }
    const Json wire = h.wire(sony);
    std::atomic<int> untested{0};
    std::atomic<int> accepted{0};
    std::vector<std::thread> workers;
    for (int d = 0; d < kDevices; ++d) {
        workers.emplace_back([&, d] {
            const std::string dev = "d" + std::to_string(d);
            if (h.server.check_configuration(h.msg(dev, {{"config", wire}}))["status"] == "still_untested") {
                ++untested;
            }
            for (;;) {
                const Json a = h.server.request_assignment(h.msg(dev, {{"config", wire}}));
                if (a["status"] != "assigned") {
                    break;
                }
                const Json r = h.server.report_result(
                    h.msg(dev, {{"config", wire}, {"test", a["test"]["id"]}, {"verdict", "passed"}}));
                if (r["status"] == "accepted") {
                    ++accepted;
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    EXPECT_EQ(accepted.load(), 5);
    EXPECT_GE(untested.load(), 1);
    EXPECT_TRUE(h.server.tested().contains(*h.server.model(), sony));
}

TEST(Server, SingleLiveAssignmentProperty) {
    // Random interleavings of requests, results and clock advances never give
    // two live holders of one test, and each test is finalized at most once.
    std::mt19937_64 rng(7);
    for (int round = 0; round < 40; ++round) {
        Harness h(fixtures::chatapp(), options(3));
        const auto sony = fixtures::sony_tuple();
        for (int d = 0; d < 4; ++d) {
            h.join("d" + std::to_string(d));
        }
        h.check("d0", sony);
        std::map<std::string, int> finals;
        for (int step = 0; step < 60; ++step) {
            const std::string dev = "d" + std::to_string(rng() % 4);
            switch (rng() % 3) {
                case 0: h.assign(dev, sony); break;
                case 1: {
                    const std::string test = "t" + std::to_string(1 + rng() % 3);
                    if (h.result(dev, sony, test, rng() % 4 != 0)["status"] == "accepted") {
                        ++finals[test];
                    }
                    break;
                }
                default: h.clock.advance(static_cast<double>(rng() % 400)); break;
            }
            const double now = *h.clock.t;
            for (const TestStatus& s : *h.server.progress(h.canon(sony))) {
                if (s.state == TestState::Assigned) {
                    EXPECT_FALSE(s.device.empty());
                    EXPECT_LE(s.lease_expiry - now, 600.0);
                }
            }
        }
        for (const auto& [test, n] : finals) {
            EXPECT_EQ(n, 1) << test;
        }
        const auto p = *h.server.progress(h.canon(sony));
        const bool all_passed =
            std::all_of(p.begin(), p.end(), [](const TestStatus& s) { return s.state == TestState::Passed; });
        EXPECT_EQ(h.server.tested().contains(*h.server.model(), sony), all_passed);
    }
}

TEST(Server, NonSnapshotMessagesStayUnderBoundFor600Features) {
    SyntheticModelSpec spec;
    spec.primitives = 480;
    spec.compounds = 120;
    spec.seed = 11;
    const FeatureModel m = make_synthetic_model(spec);
    ASSERT_GE(m.size(), 600u);
    Harness h(m, options(5));
    const CanonicalConfig c = *canonicalize(m, sample_configuration(m, 3));
    const Json wire = protocol::encode_config(m, c);
    std::vector<Json> messages;
    auto send = [&](Json req, Json (CoordinationServer::*fn)(const Json&)) {
        messages.push_back(req);
        messages.push_back((h.server.*fn)(req));
        return messages.back();
    };
    send(h.msg("dev", {{"tested_revision", 0}}), &CoordinationServer::register_device);
    send(h.msg("dev", {{"config", wire}}), &CoordinationServer::check_configuration);
    const Json a = send(h.msg("dev", {{"config", wire}}), &CoordinationServer::request_assignment);
    send(h.msg("dev", {{"config", wire}, {"test", a["test"]["id"]}, {"verdict", "failed"}, {"detail", std::string(200, 'x')}}),
         &CoordinationServer::report_result);
    send(h.msg("dev", {{"known", wire}, {"unrecognized", {"Vendor.NewThing"}}}), &CoordinationServer::report_unknown);
    for (const Json& msg : messages) {
        if (!protocol::carries_snapshot(msg)) {
            EXPECT_LE(msg.dump().size(), protocol::kPayloadBound) << msg.dump().substr(0, 120);
        }
    }
}

TEST(Dispatch, RoutesAndStatusCodes) {
    Harness h;
    EXPECT_EQ(dispatch(h.server, "POST", "/register", h.msg("a").dump()).status, 200);
    EXPECT_EQ(dispatch(h.server, "POST", "/register", "{not json").status, 400);
    EXPECT_EQ(dispatch(h.server, "POST", "/config/check", h.msg("ghost", {{"config", {0}}}).dump()).status, 403);
    EXPECT_EQ(dispatch(h.server, "POST", "/exvivo", "{}").status, 501);
    EXPECT_EQ(dispatch(h.server, "POST", "/nowhere", "{}").status, 404);
    EXPECT_EQ(dispatch(h.server, "GET", "/register", "").status, 405);
    const HttpResponse json = dispatch(h.server, "GET", "/report", "");
    EXPECT_EQ(Json::parse(json.body)["schema"], "invivo.server-report/1");
    const HttpResponse csv = dispatch(h.server, "GET", "/report", "", "format=csv");
    EXPECT_EQ(csv.content_type, "text/csv");
    EXPECT_EQ(csv.body.rfind("kind,config,test,device,reporters,detail\n", 0), 0u);
}

TEST(Http, EndToEndOverLoopback) {
    Harness h;
    HttpFrontend frontend(h.server);
    const int port = frontend.bind_any("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread serving([&] { frontend.serve(); });
    httplib::Client client("127.0.0.1", port);
    auto reg = client.Post("/register", h.msg("net-1").dump(), "application/json");
    ASSERT_TRUE(reg);
    EXPECT_EQ(reg->status, 200);
    auto chk = client.Post("/config/check", h.msg("net-1", {{"config", h.wire(fixtures::sony_tuple())}}).dump(),
                           "application/json");
    ASSERT_TRUE(chk);
    EXPECT_EQ(Json::parse(chk->body)["status"], "still_untested");
    auto csv = client.Get("/report?format=csv");
    ASSERT_TRUE(csv);
    EXPECT_EQ(csv->get_header_value("Content-Type"), "text/csv");
    auto ex = client.Post("/exvivo", "{}", "application/json");
    ASSERT_TRUE(ex);
    EXPECT_EQ(ex->status, 501);
    frontend.stop();
    serving.join();
}
