#pragma once

#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vqpu/event_log.hpp"
#include "vqpu/task.hpp"

namespace vqpu {

struct NewTask {
    std::string circuit_source;
    std::string dialect;
    uint64_t shots = 0;
    std::string device_id;
    std::optional<uint64_t> seed;
    std::string created_by;
};

struct ClaimGrant {
    TaskRecord task;
    DeviceSnapshot snapshot;
};

// Per-task markers for a heartbeat call; non-owned or non-running entries
// are acknowledged without mutation.
struct HeartbeatAck {
    std::map<std::string, std::string> marks;  // "OK" | "NOT_OWNER" | "ILLEGAL_STATE" | "UNKNOWN_TASK"
};

// Resolves a device id to its current authoritative snapshot; nullopt means
// the device no longer exists.
using SnapshotProvider = std::function<std::optional<DeviceSnapshot>(const std::string&)>;

// The authoritative task store. Every mutation passes through one mutex (the
// store serialization boundary); claim is the ownership linearisation point.
// Each committed transition appends exactly one lifecycle event and one
// journal line; rejected duplicate terminal reports go to a separate audit
// log, never into task state.
class TaskStore {
  public:
    TaskStore(std::filesystem::path journal_path, std::filesystem::path audit_path,
              EventLog& events);

    TaskRecord enqueue(const NewTask& fields);

    // Atomically grants the oldest QUEUED task (FIFO by created_at, ties by
    // task_id), binding the snapshot read from `provider` inside the claim
    // serialization boundary. A task whose device has disappeared is moved
    // to FAILED(DEVICE_UNAVAILABLE) and the scan continues.
    std::optional<ClaimGrant> claim(const std::string& agent_id, const SnapshotProvider& provider);

    TaskRecord report_running(const std::string& task_id, const std::string& agent_id,
                              const std::string& scheduler_job_id);
    TaskRecord report_completed(const std::string& task_id, const std::string& agent_id,
                                nlohmann::json result);
    TaskRecord report_failed(const std::string& task_id, const std::string& agent_id,
                             ErrorEnvelope error);
    HeartbeatAck heartbeat(const std::string& agent_id, const std::vector<std::string>& task_ids);

    TaskRecord requeue(const std::string& task_id);
    TaskRecord cancel(const std::string& task_id);
    TaskRecord force_fail(const std::string& task_id, ErrorEnvelope error);

    std::optional<TaskRecord> get(const std::string& task_id) const;

    struct Filter {
        std::optional<TaskState> state;
        std::optional<std::string> device_id;
        std::optional<std::string> owner;
    };
    std::vector<TaskRecord> query(const Filter& filter) const;

    // Pure query: RUNNING tasks whose last heartbeat is older than the
    // window. Never mutates state.
    std::vector<TaskRecord> stale_tasks(double liveness_window_s) const;

    // Long-poll support: waits until a QUEUED task may exist or the timeout
    // elapses. Spurious wakeups are fine; callers re-run claim.
    bool wait_for_queued(double timeout_s);

    size_t task_count() const;

  private:
    TaskRecord& must_get_locked(const std::string& task_id);
    void persist_locked(const TaskRecord& r);
    void audit_locked(const std::string& task_id, const std::string& agent_id,
                      const std::string& attempted, const std::string& reason);
    TaskRecord commit_terminal_locked(TaskRecord& r, TaskState target, const char* event_type,
                                      nlohmann::json event_payload);

    mutable std::mutex mu_;
    std::condition_variable queued_cv_;
    std::map<std::string, TaskRecord> tasks_;
    std::filesystem::path journal_path_;
    std::ofstream journal_;
    std::ofstream audit_;
    EventLog& events_;
};

}  // namespace vqpu
