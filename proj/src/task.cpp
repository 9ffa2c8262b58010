#include "vqpu/task.hpp"

namespace vqpu {

const char* to_string(TaskState s) {
    switch (s) {
        case TaskState::Queued: return "QUEUED";
        case TaskState::Running: return "RUNNING";
        case TaskState::Completed: return "COMPLETED";
        case TaskState::Failed: return "FAILED";
        case TaskState::Cancelled: return "CANCELLED";
    }
    return "UNKNOWN";
}

TaskState task_state_from_string(const std::string& s) {
    if (s == "QUEUED") return TaskState::Queued;
    if (s == "RUNNING") return TaskState::Running;
    if (s == "COMPLETED") return TaskState::Completed;
    if (s == "FAILED") return TaskState::Failed;
    if (s == "CANCELLED") return TaskState::Cancelled;
    throw Error(codes::kStoreError, "unknown task state: " + s);
}

bool is_terminal(TaskState s) {
    return s == TaskState::Completed || s == TaskState::Failed || s == TaskState::Cancelled;
}

namespace {

nlohmann::ordered_json opt_time(const std::optional<SystemTime>& t) {
    return t ? nlohmann::ordered_json(to_iso8601(*t)) : nlohmann::ordered_json(nullptr);
}

std::optional<SystemTime> time_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return parse_iso8601(j.at(key).get<std::string>());
}

nlohmann::ordered_json opt_string(const std::optional<std::string>& s) {
    return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr);
}

std::optional<std::string> string_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

}  // namespace

nlohmann::ordered_json TaskRecord::to_json() const {
    nlohmann::ordered_json j;
    j["task_id"] = task_id;
    j["state"] = to_string(state);
    j["device_id"] = device_id;
    j["dialect"] = dialect;
    j["shots"] = shots;
    j["seed"] = seed;
    j["created_by"] = created_by;
    j["owner"] = opt_string(owner);
    j["scheduler_job_id"] = opt_string(scheduler_job_id);
    j["created_at"] = to_iso8601(created_at);
    j["claimed_at"] = opt_time(claimed_at);
    j["terminal_at"] = opt_time(terminal_at);
    j["last_heartbeat_at"] = opt_time(last_heartbeat_at);
    j["circuit_source"] = circuit_source;
    j["bound_snapshot"] =
        bound_snapshot ? nlohmann::ordered_json(snapshot_to_json(*bound_snapshot))
                       : nlohmann::ordered_json(nullptr);
    j["result"] = result ? nlohmann::ordered_json(*result) : nlohmann::ordered_json(nullptr);
    j["error"] = error ? error->to_json() : nlohmann::ordered_json(nullptr);
    return j;
}

TaskRecord TaskRecord::from_json(const nlohmann::json& j) {
    TaskRecord r;
    r.task_id = j.at("task_id").get<std::string>();
    r.state = task_state_from_string(j.at("state").get<std::string>());
    r.device_id = j.at("device_id").get<std::string>();
    r.dialect = j.value("dialect", "nqasm-1");
    r.shots = j.at("shots").get<uint64_t>();
    r.seed = j.value("seed", uint64_t{0});
    r.created_by = j.value("created_by", "");
    r.owner = string_from(j, "owner");
    r.scheduler_job_id = string_from(j, "scheduler_job_id");
    if (auto t = time_from(j, "created_at")) r.created_at = *t;
    r.claimed_at = time_from(j, "claimed_at");
    r.terminal_at = time_from(j, "terminal_at");
    r.last_heartbeat_at = time_from(j, "last_heartbeat_at");
    r.circuit_source = j.value("circuit_source", "");
    if (j.contains("bound_snapshot") && !j.at("bound_snapshot").is_null())
        r.bound_snapshot = snapshot_from_json(j.at("bound_snapshot"));
    if (j.contains("result") && !j.at("result").is_null()) r.result = j.at("result");
    if (j.contains("error") && !j.at("error").is_null())
        r.error = ErrorEnvelope::from_json(j.at("error"));
    return r;
}

nlohmann::ordered_json LifecycleEvent::to_json() const {
    nlohmann::ordered_json j;
    j["sequence"] = sequence;
    j["event_type"] = event_type;
    j["task_id"] = task_id;
    j["device_id"] = device_id;
    j["timestamp"] = timestamp;
    j["payload"] = payload;
    return j;
}

LifecycleEvent LifecycleEvent::from_json(const nlohmann::json& j) {
    LifecycleEvent ev;
    ev.sequence = j.at("sequence").get<uint64_t>();
    ev.event_type = j.at("event_type").get<std::string>();
    ev.task_id = j.value("task_id", "");
    ev.device_id = j.value("device_id", "");
    ev.timestamp = j.value("timestamp", "");
    ev.payload = j.contains("payload") ? j.at("payload") : nlohmann::json(nullptr);
    return ev;
}

}  // namespace vqpu
