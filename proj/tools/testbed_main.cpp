#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "httpfuzz/testbed.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mock vulnerable HTTP target"};
    app.require_subcommand(1);

    auto* serve = app.add_subcommand("serve", "serve a scenario");
    std::string scenario_file;
    int port = 0;
    serve->add_option("scenario", scenario_file, "scenario JSON")->required();
    serve->add_option("--port", port, "listen port (0 = ephemeral)");

    CLI11_PARSE(app, argc, argv);

    try {
        auto scenario = httpfuzz::testbed::Scenario::load(scenario_file);
        httpfuzz::testbed::Server server(std::move(scenario), port);
        std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop) {
            timespec ts{0, 100 * 1000 * 1000};
            nanosleep(&ts, nullptr);
        }
        server.stop();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
