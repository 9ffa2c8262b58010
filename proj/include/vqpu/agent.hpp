#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "vqpu/api_client.hpp"
#include "vqpu/payload.hpp"
#include "vqpu/scheduler.hpp"

namespace vqpu {

struct BackendConfig {
    enum class Kind { Local, Simulated } kind = Kind::Local;
    FaultPlan plan;  // capacity applies to both kinds

    nlohmann::ordered_json to_json() const;
    static BackendConfig from_json(const nlohmann::json& j);
};

struct AgentConfig {
    std::string server_url;
    std::string api_key;
    std::string agent_id;
    double poll_interval_s = 30;
    double heartbeat_interval_s = 30;
    int max_slots = 2;
    std::filesystem::path work_dir;
    std::string runner_bin = "vqpu-runner";
    BackendConfig backend;

    nlohmann::ordered_json to_json() const;
    static AgentConfig from_json(const nlohmann::json& j);
    static AgentConfig from_file(const std::filesystem::path& path);
};

// The execution-plane controller: claims work outbound, materialises run
// directories, submits through the scheduler boundary, heartbeats owned
// tasks and finalises artifacts. Owns no durable service truth — its
// in-memory table is reconstructible from the server plus the filesystem.
class Agent {
  public:
    explicit Agent(AgentConfig config);
    ~Agent();

    Agent(const Agent&) = delete;
    Agent& operator=(const Agent&) = delete;

    void start();  // runs restart recovery, then the three loops
    void stop();   // joins loops; scheduler children are killed
    // Abrupt-death emulation: identical server-visible effect to a process
    // kill — heartbeats stop, nothing is finalised, children die.
    void kill();

    size_t owned_count() const;
    bool idle() const { return owned_count() == 0; }
    SchedulerBackend& backend() { return *backend_; }
    const AgentConfig& config() const { return config_; }

  private:
    struct Owned {
        std::string task_id;
        std::filesystem::path run_dir;
        std::optional<std::string> job_id;  // empty for observe-only recovery entries
        int publish_failures = 0;
        double next_publish_attempt = 0;  // monotonic seconds
    };

    void acquisition_loop();
    void heartbeat_loop();
    void finalisation_loop();
    void recover_on_restart();

    void handle_grant(const nlohmann::json& task, const nlohmann::json& snapshot);
    void finalise(const Owned& owned, const std::optional<TerminalRecord>& terminal);
    // One legal terminal publication attempt; 403/409 are absorbed as
    // already-finalised / reassigned. Returns false on transport failure.
    bool publish_completed(const Owned& owned, const nlohmann::json& result);
    bool publish_failed(const Owned& owned, const ErrorEnvelope& env);
    void note_publish_failure(const std::string& task_id);
    void drop_owned(const std::string& task_id);

    void backoff_sleep(int attempt);
    bool sleep_until_poke(double seconds);  // false when stopping

    AgentConfig config_;
    ApiClient client_;
    std::unique_ptr<SchedulerBackend> backend_;

    mutable std::mutex mu_;
    std::condition_variable poke_;
    std::map<std::string, Owned> owned_;
    bool running_ = false;

    std::thread acquisition_thread_;
    std::thread heartbeat_thread_;
    std::thread finalisation_thread_;
};

}  // namespace vqpu
