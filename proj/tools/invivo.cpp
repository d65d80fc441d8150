#include "invivo/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

using namespace invivo;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int emit(const cli::CommandOutcome& o) {
    std::cout << o.out;
    std::cerr << o.err;
    return o.exit_code;
}

int serve(const cli::ServeOptions& options, const std::string& host, int port) {
    std::unique_ptr<CoordinationServer> server;
    try {
        server = cli::open_server(options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kUsageError;
    }
    HttpFrontend frontend(*server);
    const int bound = port == 0 ? frontend.bind_any(host) : port;
    if (bound < 0) {
        std::cerr << "error: cannot bind " << host << "\n";
        return cli::kUsageError;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::atomic<bool> failed{false};
    std::thread worker([&] {
        if (port == 0) {
            frontend.serve();
        } else if (!frontend.listen(host, port)) {
            failed = true;
            g_stop = true;
        }
    });
    std::cout << "listening on http://" << host << ":" << bound << " (model v" << server->model()->version() << ")"
              << std::endl;
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    frontend.stop();
    worker.join();
    if (failed) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return cli::kUsageError;
    }
    server->save();
    return cli::kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Configuration-aware field testing toolkit"};
    app.require_subcommand(1);
    bool json = false;
    app.add_flag("--json", json, "Machine-readable output");

    std::string model, config, tested, schema, root = "App", out, device, app_part, tuples, snapshot, host = "127.0.0.1";
    std::optional<std::string> model_out, report_out, out_opt;
    std::optional<std::uint64_t> seed;
    std::size_t n = 1;
    int port = 8080;

    auto* validate = app.add_subcommand("validate", "Check a configuration against a model");
    validate->add_option("model", model, "Model document")->required();
    validate->add_option("config", config, "Configuration file, one feature per line")->required();

    auto* classify = app.add_subcommand("classify", "Tested / untested / unknown");
    classify->add_option("model", model)->required();
    classify->add_option("tested", tested, "Tested snapshot or tuple list")->required();
    classify->add_option("config", config)->required();

    auto* count = app.add_subcommand("count", "Exact number of valid configurations");
    count->add_option("model", model)->required();

    auto* sample = app.add_subcommand("sample", "Uniformly sample valid configurations");
    sample->add_option("model", model)->required();
    sample->add_option("-n,--count", n, "Number of samples")->check(CLI::PositiveNumber);
    sample->add_option("--seed", seed);

    auto* map = app.add_subcommand("map-prefs", "Map a preference schema to a model fragment");
    map->add_option("schema", schema, "Preference XML")->required();
    map->add_option("--root", root, "Root feature id");
    map->add_option("--model-out", model_out);
    map->add_option("--report-out", report_out, "CSV mapping report");

    auto* merge = app.add_subcommand("merge", "Join device and app model parts under one root");
    merge->add_option("device", device)->required();
    merge->add_option("app", app_part)->required();
    merge->add_option("--root", root)->required();
    merge->add_option("-o,--out", out_opt);

    auto* tested_cmd = app.add_subcommand("tested", "Tested-configuration snapshots");
    tested_cmd->require_subcommand(1);
    auto* build = tested_cmd->add_subcommand("build", "Build a snapshot from tuple lines");
    build->add_option("model", model)->required();
    build->add_option("tuples", tuples)->required();
    build->add_option("-o,--out", out)->required();
    auto* dump = tested_cmd->add_subcommand("dump", "List a snapshot");
    dump->add_option("model", model)->required();
    dump->add_option("snapshot", snapshot)->required();

    cli::ServeOptions serve_options;
    auto* serve_cmd = app.add_subcommand("serve", "Run the coordination server");
    serve_cmd->add_option("--state-dir", serve_options.state_dir, "Defaults to $INVIVO_STATE_DIR");
    serve_cmd->add_option("--model", serve_options.model_path, "Initial model for a fresh state directory");
    serve_cmd->add_option("--suite-size", serve_options.suite_size)->check(CLI::PositiveNumber);
    serve_cmd->add_option("--app", serve_options.app_id);
    serve_cmd->add_option("--lease", serve_options.lease_seconds, "Lease in seconds")->check(CLI::PositiveNumber);
    serve_cmd->add_flag("--migrate-on-publish", serve_options.migrate_on_publish);
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535));

    cli::SimulateOptions sim_options;
    auto* simulate = app.add_subcommand("simulate", "Run a device-fleet simulation");
    simulate->add_option("--scenario", sim_options.scenario)->required();
    simulate->add_option("--seed", sim_options.seed);
    simulate->add_option("--out", sim_options.out_dir, "Report directory");
    simulate->add_flag("--stress", sim_options.stress, "Concurrent workers against one server");
    simulate->add_option("--workers", sim_options.workers)->check(CLI::PositiveNumber);

    cli::GenerateOptions gen;
    auto* generate = app.add_subcommand("generate-model", "Synthetic preference-style model");
    generate->add_option("--name", gen.name);
    generate->add_option("--primitives", gen.primitives);
    generate->add_option("--compounds", gen.compounds);
    generate->add_option("--categories", gen.categories);
    generate->add_option("--constraints", gen.constraints);
    generate->add_option("--seed", gen.seed);
    generate->add_option("-o,--out", gen.out);

    for (auto* sub : app.get_subcommands({})) {
        sub->add_flag("--json", json, "Machine-readable output");
    }
    for (auto* sub : tested_cmd->get_subcommands({})) {
        sub->add_flag("--json", json, "Machine-readable output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kUsageError;
    }

    if (*validate) return emit(cli::validate(model, config, json));
    if (*classify) return emit(cli::classify(model, tested, config, json));
    if (*count) return emit(cli::count(model, json));
    if (*sample) return emit(cli::sample(model, n, seed, json));
    if (*map) return emit(cli::map_prefs(schema, root, model_out, report_out, json));
    if (*merge) return emit(cli::merge(device, app_part, root, out_opt, json));
    if (*build) return emit(cli::tested_build(model, tuples, out, json));
    if (*dump) return emit(cli::tested_dump(model, snapshot, json));
    if (*simulate) return emit(cli::simulate(sim_options, json));
    if (*generate) return emit(cli::generate_model(gen, json));
    if (*serve_cmd) return serve(serve_options, host, port);
    return cli::kUsageError;
}
