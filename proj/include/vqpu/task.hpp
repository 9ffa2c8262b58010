#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vqpu/device.hpp"
#include "vqpu/errors.hpp"
#include "vqpu/util.hpp"

namespace vqpu {

enum class TaskState { Queued, Running, Completed, Failed, Cancelled };

const char* to_string(TaskState s);
TaskState task_state_from_string(const std::string& s);
bool is_terminal(TaskState s);

// Authoritative service-side task. bound_snapshot is set exactly once, when
// the task first becomes RUNNING, and never mutates afterwards.
struct TaskRecord {
    std::string task_id;
    std::string circuit_source;
    std::string dialect;
    uint64_t shots = 0;
    std::string device_id;
    uint64_t seed = 0;
    std::string created_by;

    TaskState state = TaskState::Queued;
    std::optional<std::string> owner;
    std::optional<DeviceSnapshot> bound_snapshot;
    std::optional<std::string> scheduler_job_id;

    SystemTime created_at{};
    std::optional<SystemTime> claimed_at;
    std::optional<SystemTime> terminal_at;
    std::optional<SystemTime> last_heartbeat_at;

    std::optional<nlohmann::json> result;
    std::optional<ErrorEnvelope> error;

    nlohmann::ordered_json to_json() const;
    static TaskRecord from_json(const nlohmann::json& j);
};

namespace events {
inline constexpr const char* kTaskQueued = "TASK_QUEUED";
inline constexpr const char* kTaskRunning = "TASK_RUNNING";
inline constexpr const char* kTaskCompleted = "TASK_COMPLETED";
inline constexpr const char* kTaskFailed = "TASK_FAILED";
inline constexpr const char* kTaskCancelled = "TASK_CANCELLED";
inline constexpr const char* kTaskRequeued = "TASK_REQUEUED";
inline constexpr const char* kDeviceUpdated = "DEVICE_UPDATED";
}  // namespace events

// Append-only typed projection of a committed state change. Sequences are
// global, gap-free and strictly increasing.
struct LifecycleEvent {
    uint64_t sequence = 0;
    std::string event_type;
    std::string task_id;    // empty for device events
    std::string device_id;  // empty for task events
    std::string timestamp;
    nlohmann::json payload;

    nlohmann::ordered_json to_json() const;
    static LifecycleEvent from_json(const nlohmann::json& j);
};

}  // namespace vqpu
