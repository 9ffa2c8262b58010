#include "vqpu/task_store.hpp"

#include <algorithm>

namespace vqpu {

namespace {

std::string new_task_id() { return "tk-" + random_hex(8); }

}  // namespace

TaskStore::TaskStore(std::filesystem::path journal_path, std::filesystem::path audit_path,
                     EventLog& events)
    : journal_path_(std::move(journal_path)), events_(events) {
    if (std::filesystem::exists(journal_path_)) {
        std::ifstream in(journal_path_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            auto r = TaskRecord::from_json(j);
            tasks_[r.task_id] = std::move(r);  // last line per task wins
        }
    }
    if (!journal_path_.parent_path().empty())
        std::filesystem::create_directories(journal_path_.parent_path());
    if (!audit_path.parent_path().empty())
        std::filesystem::create_directories(audit_path.parent_path());
    journal_.open(journal_path_, std::ios::app);
    if (!journal_) throw Error(codes::kStoreError, "cannot open journal " + journal_path_.string());
    audit_.open(audit_path, std::ios::app);
    if (!audit_) throw Error(codes::kStoreError, "cannot open audit log " + audit_path.string());
}

void TaskStore::persist_locked(const TaskRecord& r) {
    journal_ << r.to_json().dump() << "\n";
    journal_.flush();
    if (!journal_) throw Error(codes::kStoreError, "journal write failed");
}

void TaskStore::audit_locked(const std::string& task_id, const std::string& agent_id,
                             const std::string& attempted, const std::string& reason) {
    nlohmann::ordered_json j;
    j["timestamp"] = now_iso8601();
    j["task_id"] = task_id;
    j["agent_id"] = agent_id;
    j["attempted"] = attempted;
    j["reason"] = reason;
    audit_ << j.dump() << "\n";
    audit_.flush();
}

TaskRecord& TaskStore::must_get_locked(const std::string& task_id) {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw Error(codes::kUnknownTask, "no such task: " + task_id);
    return it->second;
}

TaskRecord TaskStore::enqueue(const NewTask& fields) {
    std::lock_guard lock(mu_);
    TaskRecord r;
    r.task_id = new_task_id();
    while (tasks_.count(r.task_id)) r.task_id = new_task_id();
    r.circuit_source = fields.circuit_source;
    r.dialect = fields.dialect;
    r.shots = fields.shots;
    r.device_id = fields.device_id;
    r.seed = fields.seed.value_or(random_u64());
    r.created_by = fields.created_by;
    r.state = TaskState::Queued;
    r.created_at = std::chrono::system_clock::now();
    tasks_[r.task_id] = r;
    persist_locked(r);
    events_.append(events::kTaskQueued, r.task_id, "",
                   {{"state", "QUEUED"}, {"device_id", r.device_id}, {"shots", r.shots}});
    queued_cv_.notify_all();
    return r;
}

std::optional<ClaimGrant> TaskStore::claim(const std::string& agent_id,
                                           const SnapshotProvider& provider) {
    if (agent_id.empty()) throw Error(codes::kNotOwner, "agent identity must be non-empty");
    std::lock_guard lock(mu_);

    std::vector<TaskRecord*> queued;
    for (auto& [id, r] : tasks_) {
        (void)id;
        if (r.state == TaskState::Queued) queued.push_back(&r);
    }
    std::sort(queued.begin(), queued.end(), [](const TaskRecord* a, const TaskRecord* b) {
        return std::tie(a->created_at, a->task_id) < std::tie(b->created_at, b->task_id);
    });

    for (TaskRecord* r : queued) {
        // Authoritative snapshot read happens inside the claim serialization
        // boundary, never from the TTL cache.
        auto snap = provider(r->device_id);
        if (!snap) {
            r->state = TaskState::Failed;
            r->terminal_at = std::chrono::system_clock::now();
            r->error = ErrorEnvelope::make(codes::kDeviceUnavailable,
                                           "device " + r->device_id + " no longer exists");
            persist_locked(*r);
            events_.append(events::kTaskFailed, r->task_id, "",
                           {{"state", "FAILED"}, {"code", codes::kDeviceUnavailable}});
            continue;
        }
        const auto now = std::chrono::system_clock::now();
        r->state = TaskState::Running;
        r->owner = agent_id;
        r->bound_snapshot = std::move(snap);
        r->claimed_at = now;
        r->last_heartbeat_at = now;
        persist_locked(*r);
        events_.append(events::kTaskRunning, r->task_id, "",
                       {{"state", "RUNNING"},
                        {"owner", agent_id},
                        {"snapshot_version", r->bound_snapshot->snapshot_version}});
        return ClaimGrant{*r, *r->bound_snapshot};
    }
    return std::nullopt;
}

TaskRecord TaskStore::report_running(const std::string& task_id, const std::string& agent_id,
                                     const std::string& scheduler_job_id) {
    std::lock_guard lock(mu_);
    TaskRecord& r = must_get_locked(task_id);
    if (r.state != TaskState::Running)
        throw Error(codes::kIllegalTransition,
                    "report_running on task in state " + std::string(to_string(r.state)));
    if (!r.owner || *r.owner != agent_id)
        throw Error(codes::kNotOwner, "task " + task_id + " is not owned by " + agent_id);
    r.scheduler_job_id = scheduler_job_id;
    r.last_heartbeat_at = std::chrono::system_clock::now();
    persist_locked(r);
    return r;
}

TaskRecord TaskStore::commit_terminal_locked(TaskRecord& r, TaskState target,
                                             const char* event_type,
                                             nlohmann::json event_payload) {
    r.state = target;
    r.terminal_at = std::chrono::system_clock::now();
    persist_locked(r);
    events_.append(event_type, r.task_id, "", std::move(event_payload));
    return r;
}

TaskRecord TaskStore::report_completed(const std::string& task_id, const std::string& agent_id,
                                       nlohmann::json result) {
    std::lock_guard lock(mu_);
    TaskRecord& r = must_get_locked(task_id);
    if (is_terminal(r.state)) {
        audit_locked(task_id, agent_id, "report_completed",
                     "task already terminal in state " + std::string(to_string(r.state)));
        throw Error(codes::kIllegalTransition, "task already terminal");
    }
    if (r.state != TaskState::Running)
        throw Error(codes::kIllegalTransition, "completion report on non-running task");
    if (!r.owner || *r.owner != agent_id)
        throw Error(codes::kNotOwner, "task " + task_id + " is not owned by " + agent_id);
    r.result = std::move(result);
    return commit_terminal_locked(r, TaskState::Completed, events::kTaskCompleted,
                                  {{"state", "COMPLETED"}, {"owner", agent_id}});
}

TaskRecord TaskStore::report_failed(const std::string& task_id, const std::string& agent_id,
                                    ErrorEnvelope error) {
    std::lock_guard lock(mu_);
    TaskRecord& r = must_get_locked(task_id);
    if (is_terminal(r.state)) {
        audit_locked(task_id, agent_id, "report_failed",
                     "task already terminal in state " + std::string(to_string(r.state)));
        throw Error(codes::kIllegalTransition, "task already terminal");
    }
    if (r.state != TaskState::Running)
        throw Error(codes::kIllegalTransition, "failure report on non-running task");
    if (!r.owner || *r.owner != agent_id)
        throw Error(codes::kNotOwner, "task " + task_id + " is not owned by " + agent_id);
    const std::string code = error.code;
    r.error = std::move(error);
    return commit_terminal_locked(r, TaskState::Failed, events::kTaskFailed,
                                  {{"state", "FAILED"}, {"owner", agent_id}, {"code", code}});
}

HeartbeatAck TaskStore::heartbeat(const std::string& agent_id,
                                  const std::vector<std::string>& task_ids) {
    std::lock_guard lock(mu_);
    HeartbeatAck ack;
    const auto now = std::chrono::system_clock::now();
    for (const auto& id : task_ids) {
        auto it = tasks_.find(id);
        if (it == tasks_.end()) {
            ack.marks[id] = "UNKNOWN_TASK";
            continue;
        }
        TaskRecord& r = it->second;
        if (r.state != TaskState::Running) {
            ack.marks[id] = "ILLEGAL_STATE";
        } else if (!r.owner || *r.owner != agent_id) {
            ack.marks[id] = "NOT_OWNER";
        } else {
            r.last_heartbeat_at = now;
            persist_locked(r);
            ack.marks[id] = "OK";
        }
    }
    return ack;
}

TaskRecord TaskStore::requeue(const std::string& task_id) {
    std::lock_guard lock(mu_);
    TaskRecord& r = must_get_locked(task_id);
    if (r.state != TaskState::Running)
        throw Error(codes::kIllegalTransition,
                    "requeue requires RUNNING, task is " + std::string(to_string(r.state)));
    // A later claim re-binds a fresh snapshot; all ownership context clears.
    r.state = TaskState::Queued;
    r.owner.reset();
    r.bound_snapshot.reset();
    r.claimed_at.reset();
    r.scheduler_job_id.reset();
    r.last_heartbeat_at.reset();
    persist_locked(r);
    events_.append(events::kTaskRequeued, r.task_id, "", {{"state", "QUEUED"}});
    queued_cv_.notify_all();
    return r;
}

TaskRecord TaskStore::cancel(const std::string& task_id) {
    std::lock_guard lock(mu_);
    TaskRecord& r = must_get_locked(task_id);
    if (r.state != TaskState::Queued && r.state != TaskState::Running)
        throw Error(codes::kIllegalTransition,
                    "cancel requires QUEUED or RUNNING, task is " +
                        std::string(to_string(r.state)));
    return commit_terminal_locked(r, TaskState::Cancelled, events::kTaskCancelled,
                                  {{"state", "CANCELLED"}});
}

TaskRecord TaskStore::force_fail(const std::string& task_id, ErrorEnvelope error) {
    std::lock_guard lock(mu_);
    TaskRecord& r = must_get_locked(task_id);
    if (r.state != TaskState::Queued && r.state != TaskState::Running)
        throw Error(codes::kIllegalTransition,
                    "force-fail requires QUEUED or RUNNING, task is " +
                        std::string(to_string(r.state)));
    const std::string code = error.code;
    r.error = std::move(error);
    return commit_terminal_locked(r, TaskState::Failed, events::kTaskFailed,
                                  {{"state", "FAILED"}, {"code", code}, {"forced", true}});
}

std::optional<TaskRecord> TaskStore::get(const std::string& task_id) const {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) return std::nullopt;
    return it->second;
}

std::vector<TaskRecord> TaskStore::query(const Filter& filter) const {
    std::lock_guard lock(mu_);
    std::vector<TaskRecord> out;
    for (const auto& [id, r] : tasks_) {
        (void)id;
        if (filter.state && r.state != *filter.state) continue;
        if (filter.device_id && r.device_id != *filter.device_id) continue;
        if (filter.owner && (!r.owner || *r.owner != *filter.owner)) continue;
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const TaskRecord& a, const TaskRecord& b) {
        return std::tie(a.created_at, a.task_id) < std::tie(b.created_at, b.task_id);
    });
    return out;
}

std::vector<TaskRecord> TaskStore::stale_tasks(double liveness_window_s) const {
    std::lock_guard lock(mu_);
    std::vector<TaskRecord> out;
    const auto now = std::chrono::system_clock::now();
    for (const auto& [id, r] : tasks_) {
        (void)id;
        if (r.state != TaskState::Running || !r.last_heartbeat_at) continue;
        const double age =
            std::chrono::duration<double>(now - *r.last_heartbeat_at).count();
        if (age > liveness_window_s) out.push_back(r);
    }
    return out;
}

bool TaskStore::wait_for_queued(double timeout_s) {
    std::unique_lock lock(mu_);
    const bool has_queued = [&] {
        return std::any_of(tasks_.begin(), tasks_.end(),
                           [](const auto& kv) { return kv.second.state == TaskState::Queued; });
    }();
    if (has_queued) return true;
    queued_cv_.wait_for(lock, std::chrono::duration<double>(timeout_s));
    return std::any_of(tasks_.begin(), tasks_.end(),
                       [](const auto& kv) { return kv.second.state == TaskState::Queued; });
}

size_t TaskStore::task_count() const {
    std::lock_guard lock(mu_);
    return tasks_.size();
}

}  // namespace vqpu
