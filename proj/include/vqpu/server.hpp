#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "vqpu/auth.hpp"
#include "vqpu/device_store.hpp"
#include "vqpu/event_log.hpp"
#include "vqpu/sse_broker.hpp"
#include "vqpu/task_store.hpp"

namespace httplib {
class Server;
}

namespace vqpu {

struct ServerConfig {
    std::string bind_host = "127.0.0.1";
    int bind_port = 8080;  // 0 binds an ephemeral port
    std::filesystem::path store_path = "vqpu-tasks.jsonl";
    std::filesystem::path event_log_path = "vqpu-events.jsonl";
    std::filesystem::path api_keys_file;  // empty: configure AuthTable directly
    double cache_ttl_s = 5.0;
    double liveness_window_s = 90.0;
    size_t sse_queue_capacity = 256;
    size_t sse_replay_window = 10000;
    double sse_keepalive_s = 15.0;

    // VQPU_BIND_ADDR, VQPU_STORE_PATH, VQPU_EVENT_LOG_PATH, VQPU_CACHE_TTL_S,
    // VQPU_LIVENESS_WINDOW_S, VQPU_API_KEYS_FILE
    static ServerConfig from_env();
};

// The cloud-facing service. Owns the authoritative task and device stores,
// the TTL snapshot cache, the event log and the SSE broker; exposes the
// HTTP+JSON API. Contains no scheduler-facing capability and never opens a
// connection toward an agent.
class ControlPlane {
  public:
    explicit ControlPlane(ServerConfig config);
    ControlPlane(ServerConfig config, AuthTable auth);
    ~ControlPlane();

    ControlPlane(const ControlPlane&) = delete;
    ControlPlane& operator=(const ControlPlane&) = delete;

    // Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();
    bool running() const { return running_.load(); }

    const ServerConfig& config() const { return config_; }
    TaskStore& tasks() { return *tasks_; }
    DeviceStore& devices() { return devices_; }
    SnapshotCache& cache() { return cache_; }
    EventLog& events() { return *events_; }
    SseBroker& broker() { return broker_; }

  private:
    void install_routes();

    ServerConfig config_;
    AuthTable auth_;
    DeviceStore devices_;
    SnapshotCache cache_;
    std::unique_ptr<EventLog> events_;
    SseBroker broker_;
    std::unique_ptr<TaskStore> tasks_;
    std::unique_ptr<httplib::Server> http_;
    std::thread serve_thread_;
    std::atomic<bool> running_{false};
};

}  // namespace vqpu
