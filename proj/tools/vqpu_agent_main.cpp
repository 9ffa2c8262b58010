#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "vqpu/agent.hpp"

namespace {
std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
    const char* config_path = nullptr;
    if (argc > 1) {
        config_path = argv[1];
    } else {
        config_path = std::getenv("VQPU_AGENT_CONFIG");
    }
    if (!config_path) {
        std::fprintf(stderr, "usage: vqpu-agent <config.json>  (or set VQPU_AGENT_CONFIG)\n");
        return 2;
    }
    try {
        auto config = vqpu::AgentConfig::from_file(config_path);
        vqpu::Agent agent(std::move(config));
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        agent.start();
        std::printf("vqpu-agent %s polling %s\n", agent.config().agent_id.c_str(),
                    agent.config().server_url.c_str());
        std::fflush(stdout);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        agent.stop();
        return 0;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "vqpu-agent: %s\n", ex.what());
        return 2;
    }
}
