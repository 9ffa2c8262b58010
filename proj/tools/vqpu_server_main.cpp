#include <csignal>
#include <cstdio>

#include "vqpu/server.hpp"

namespace {
vqpu::ControlPlane* g_plane = nullptr;

void handle_signal(int) {
    if (g_plane) g_plane->stop();
}
}  // namespace

int main() {
    try {
        auto config = vqpu::ServerConfig::from_env();
        if (config.api_keys_file.empty()) {
            std::fprintf(stderr, "VQPU_API_KEYS_FILE must be set\n");
            return 2;
        }
        vqpu::ControlPlane plane(config);
        g_plane = &plane;
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);

        const int port = plane.start();
        std::printf("vqpu-server listening on %s:%d\n", config.bind_host.c_str(), port);
        std::fflush(stdout);
        while (plane.running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        return 0;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "vqpu-server: %s\n", ex.what());
        return 2;
    }
}
