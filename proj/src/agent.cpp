#include "vqpu/agent.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "vqpu/util.hpp"

namespace vqpu {

nlohmann::ordered_json BackendConfig::to_json() const {
    nlohmann::ordered_json j;
    j["type"] = kind == Kind::Local ? "local" : "simulated";
    j["plan"] = plan.to_json();
    return j;
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
    BackendConfig cfg;
    const auto type = j.value("type", "local");
    if (type == "simulated") {
        cfg.kind = Kind::Simulated;
    } else if (type == "local") {
        cfg.kind = Kind::Local;
    } else {
        throw Error(codes::kSubmitRejected, "unknown backend type: " + type);
    }
    if (j.contains("plan")) cfg.plan = FaultPlan::from_json(j.at("plan"));
    return cfg;
}

nlohmann::ordered_json AgentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["server_url"] = server_url;
    j["api_key"] = api_key;
    j["agent_id"] = agent_id;
    j["poll_interval_s"] = poll_interval_s;
    j["heartbeat_interval_s"] = heartbeat_interval_s;
    j["max_slots"] = max_slots;
    j["work_dir"] = work_dir.string();
    j["runner_bin"] = runner_bin;
    j["backend"] = backend.to_json();
    return j;
}

AgentConfig AgentConfig::from_json(const nlohmann::json& j) {
    AgentConfig cfg;
    try {
        cfg.server_url = j.at("server_url").get<std::string>();
        cfg.api_key = j.at("api_key").get<std::string>();
        cfg.agent_id = j.at("agent_id").get<std::string>();
        cfg.work_dir = j.at("work_dir").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw Error(codes::kPayloadMalformed, std::string("bad agent config: ") + ex.what());
    }
    cfg.poll_interval_s = j.value("poll_interval_s", 30.0);
    cfg.heartbeat_interval_s = j.value("heartbeat_interval_s", 30.0);
    cfg.max_slots = j.value("max_slots", 2);
    cfg.runner_bin = j.value("runner_bin", "vqpu-runner");
    if (j.contains("backend")) cfg.backend = BackendConfig::from_json(j.at("backend"));
    if (cfg.agent_id.empty()) throw Error(codes::kPayloadMalformed, "agent_id must be non-empty");
    if (cfg.max_slots < 1) throw Error(codes::kPayloadMalformed, "max_slots must be >= 1");
    return cfg;
}

AgentConfig AgentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(codes::kPayloadMalformed, "cannot open agent config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded())
        throw Error(codes::kPayloadMalformed, "agent config is not valid JSON");
    return from_json(j);
}

Agent::Agent(AgentConfig config)
    : config_(std::move(config)), client_(config_.server_url, config_.api_key) {
    if (config_.backend.kind == BackendConfig::Kind::Simulated) {
        backend_ = make_simulated_backend(config_.backend.plan);
    } else {
        backend_ = make_local_backend(config_.backend.plan.capacity);
    }
    std::filesystem::create_directories(config_.work_dir);
}

Agent::~Agent() { stop(); }

void Agent::start() {
    {
        std::lock_guard lock(mu_);
        if (running_) return;
        running_ = true;
    }
    recover_on_restart();
    acquisition_thread_ = std::thread([this] { acquisition_loop(); });
    heartbeat_thread_ = std::thread([this] { heartbeat_loop(); });
    finalisation_thread_ = std::thread([this] { finalisation_loop(); });
}

void Agent::stop() {
    {
        std::lock_guard lock(mu_);
        if (!running_) return;
        running_ = false;
    }
    poke_.notify_all();
    backend_->terminate_all();
    if (acquisition_thread_.joinable()) acquisition_thread_.join();
    if (heartbeat_thread_.joinable()) heartbeat_thread_.join();
    if (finalisation_thread_.joinable()) finalisation_thread_.join();
}

void Agent::kill() { stop(); }

size_t Agent::owned_count() const {
    std::lock_guard lock(mu_);
    return owned_.size();
}

bool Agent::sleep_until_poke(double seconds) {
    std::unique_lock lock(mu_);
    if (!running_) return false;
    // Woken by stop() or by a freed slot; callers re-check their conditions.
    poke_.wait_for(lock, std::chrono::duration<double>(seconds));
    return running_;
}

void Agent::backoff_sleep(int attempt) {
    // 1 s base doubling to a 60 s cap, jittered ±20%
    double delay = std::min(60.0, std::ldexp(1.0, std::min(attempt, 6)));
    delay *= 0.8 + 0.4 * (static_cast<double>(random_u64() % 1000) / 1000.0);
    sleep_until_poke(delay);
}

void Agent::drop_owned(const std::string& task_id) {
    {
        std::lock_guard lock(mu_);
        owned_.erase(task_id);
    }
    poke_.notify_all();  // a slot freed; acquisition may claim again
}

// ---- acquisition ----------------------------------------------------------

void Agent::handle_grant(const nlohmann::json& task, const nlohmann::json& snapshot) {
    ExecutionPayload payload;
    payload.task_id = task.at("task_id").get<std::string>();
    payload.circuit_source = task.at("circuit_source").get<std::string>();
    payload.dialect = task.value("dialect", "nqasm-1");
    payload.shots = task.at("shots").get<uint64_t>();
    payload.seed = task.at("seed").get<uint64_t>();
    payload.bound_snapshot = snapshot_from_json(snapshot);

    const auto run_dir = config_.work_dir / payload.task_id;
    std::filesystem::create_directories(run_dir);
    // A re-claim after requeue reuses the directory: stale artifacts from the
    // previous execution must not be mistaken for this one's.
    for (const char* stale : {artifacts::kResult, artifacts::kError, artifacts::kTimings,
                              artifacts::kMeta, "runner.log"}) {
        std::error_code ec;
        std::filesystem::remove(run_dir / stale, ec);
    }
    atomic_write_file(run_dir / artifacts::kPayload, payload.canonical_string() + "\n");

    RenderedJob job;
    job.job_name = payload.task_id;
    job.run_directory = run_dir;
    job.command = {config_.runner_bin, run_dir.string()};

    std::string job_id;
    try {
        job_id = backend_->submit(job);
    } catch (const Error& e) {
        publish_failed(Owned{payload.task_id, run_dir, std::nullopt, 0}, ErrorEnvelope::from(e));
        return;
    }

    nlohmann::ordered_json meta;
    meta["scheduler_job_id"] = job_id;
    meta["submitted_at"] = now_iso8601();
    atomic_write_file(run_dir / artifacts::kMeta, meta.dump() + "\n");

    {
        std::lock_guard lock(mu_);
        owned_[payload.task_id] = Owned{payload.task_id, run_dir, job_id, 0};
    }

    for (int attempt = 0; attempt < 5; ++attempt) {
        const auto resp = client_.report_running(payload.task_id, config_.agent_id, job_id);
        if (!resp.transport_error()) break;
        backoff_sleep(attempt);
    }
}

void Agent::acquisition_loop() {
    int failures = 0;
    while (true) {
        {
            std::lock_guard lock(mu_);
            if (!running_) return;
        }
        bool has_slot;
        {
            std::lock_guard lock(mu_);
            has_slot = owned_.size() < static_cast<size_t>(config_.max_slots);
        }
        if (!has_slot) {
            if (!sleep_until_poke(config_.poll_interval_s)) return;
            continue;
        }

        const auto resp = client_.claim(config_.agent_id);
        if (resp.transport_error() || resp.status >= 500) {
            backoff_sleep(failures++);
            continue;
        }
        failures = 0;
        if (resp.status == 200 && resp.body.contains("task")) {
            try {
                handle_grant(resp.body.at("task"), resp.body.at("bound_snapshot"));
            } catch (const std::exception& ex) {
                // materialisation failed; leave the task to recovery
                std::fprintf(stderr, "[agent %s] grant handling failed: %s\n",
                             config_.agent_id.c_str(), ex.what());
                if (!sleep_until_poke(config_.poll_interval_s)) return;
            }
            continue;  // claim again immediately while slots remain
        }
        // empty queue (204) or a protocol error: wait out the poll interval
        if (!sleep_until_poke(config_.poll_interval_s)) return;
    }
}

// ---- heartbeat -------------------------------------------------------------

void Agent::heartbeat_loop() {
    while (true) {
        std::vector<std::string> ids;
        {
            std::lock_guard lock(mu_);
            if (!running_) return;
            ids.reserve(owned_.size());
            for (const auto& [id, o] : owned_) {
                (void)o;
                ids.push_back(id);
            }
        }
        // sent even when empty: the heartbeat is a liveness beacon
        const auto resp = client_.heartbeat(config_.agent_id, ids);
        if (resp.ok() && resp.body.contains("acks")) {
            for (const auto& [id, mark] : resp.body.at("acks").items()) {
                const auto m = mark.get<std::string>();
                // NOT_OWNER: ownership moved after a requeue + reclaim.
                // ILLEGAL_STATE: the task left RUNNING behind our back
                // (requeue, cancel, force-fail). Either way the directory is
                // abandoned; a late report would be rejected server-side.
                if (m == "NOT_OWNER" || m == "UNKNOWN_TASK" || m == "ILLEGAL_STATE") drop_owned(id);
            }
        }
        if (!sleep_until_poke(config_.heartbeat_interval_s)) return;
    }
}

// ---- finalisation ----------------------------------------------------------

bool Agent::publish_completed(const Owned& owned, const nlohmann::json& result) {
    const auto resp = client_.report_completed(owned.task_id, config_.agent_id, result);
    if (resp.transport_error() || resp.status >= 500) {
        note_publish_failure(owned.task_id);
        return false;
    }
    // 409: already finalised (terminal absorption); 403: ownership moved.
    // Both mean this agent's publication duty is over.
    drop_owned(owned.task_id);
    return true;
}

bool Agent::publish_failed(const Owned& owned, const ErrorEnvelope& env) {
    const auto resp = client_.report_failed(owned.task_id, config_.agent_id, env.to_json());
    if (resp.transport_error() || resp.status >= 500) {
        note_publish_failure(owned.task_id);
        return false;
    }
    drop_owned(owned.task_id);
    return true;
}

void Agent::note_publish_failure(const std::string& task_id) {
    std::lock_guard lock(mu_);
    const auto it = owned_.find(task_id);
    if (it == owned_.end()) return;
    it->second.publish_failures = std::min(it->second.publish_failures + 1, 6);
    it->second.next_publish_attempt =
        monotonic_seconds() + std::min(60.0, std::ldexp(1.0, it->second.publish_failures));
}

void Agent::finalise(const Owned& owned, const std::optional<TerminalRecord>& terminal) {
    const auto result_path = owned.run_dir / artifacts::kResult;
    const auto error_path = owned.run_dir / artifacts::kError;

    if (auto artifact = read_json_file(result_path)) {
        nlohmann::json validated;
        try {
            uint64_t shots = 0;
            int64_t snapshot_version = -1;
            if (auto payload = read_json_file(owned.run_dir / artifacts::kPayload)) {
                shots = payload->value("shots", uint64_t{0});
                if (payload->contains("bound_snapshot"))
                    snapshot_version =
                        payload->at("bound_snapshot").value("snapshot_version", int64_t{-1});
            }
            validated = validate_result_artifact(*artifact, owned.task_id, shots, snapshot_version);
        } catch (const Error& e) {
            publish_failed(owned, ErrorEnvelope::from(e));
            return;
        }
        if (auto timings = read_json_file(owned.run_dir / artifacts::kTimings))
            validated["timings"] = *timings;
        publish_completed(owned, validated);
        return;
    }

    if (auto runner_error = read_json_file(error_path)) {
        publish_failed(owned, ErrorEnvelope::make(codes::kRunnerException,
                                                  "runner reported a typed failure",
                                                  *runner_error));
        return;
    }

    if (!terminal) return;  // observe-only entry with no artifacts yet

    switch (terminal->exit_class) {
        case ExitClass::Completed:
            publish_failed(owned, ErrorEnvelope::make(codes::kArtifactMissing,
                                                      "job completed but result artifact is missing",
                                                      {{"job_id", terminal->job_id}}));
            break;
        case ExitClass::Killed:
            publish_failed(owned, ErrorEnvelope::make(codes::kJobKilled, terminal->exit_detail,
                                                      {{"job_id", terminal->job_id}}));
            break;
        case ExitClass::NeverStarted:
            publish_failed(owned, ErrorEnvelope::make(codes::kJobNeverStarted,
                                                      terminal->exit_detail,
                                                      {{"job_id", terminal->job_id}}));
            break;
        case ExitClass::Failed:
            publish_failed(owned, ErrorEnvelope::make(codes::kRunnerException,
                                                      "job failed without error artifact: " +
                                                          terminal->exit_detail,
                                                      {{"job_id", terminal->job_id}}));
            break;
    }
}

void Agent::finalisation_loop() {
    const double scan_interval = std::clamp(config_.poll_interval_s / 10.0, 0.02, 0.5);
    while (true) {
        std::vector<Owned> snapshot;
        {
            std::lock_guard lock(mu_);
            if (!running_) return;
            for (const auto& [id, o] : owned_) {
                (void)id;
                snapshot.push_back(o);
            }
        }
        const double now = monotonic_seconds();
        for (const auto& owned : snapshot) {
            if (owned.next_publish_attempt > now) continue;
            std::optional<TerminalRecord> terminal;
            if (owned.job_id) {
                try {
                    terminal = backend_->query_terminal(*owned.job_id);
                } catch (const Error&) {
                    terminal.reset();  // backend lost the job (restart); artifacts decide
                }
                if (!terminal) {
                    // Still active in the scheduler: the artifacts belong to a
                    // run in progress, so do not inspect them yet.
                    const auto active = backend_->observe_active();
                    if (active.count(*owned.job_id)) continue;
                }
            }
            finalise(owned, terminal);
        }
        if (!sleep_until_poke(scan_interval)) return;
    }
}

// ---- restart recovery --------------------------------------------------------

void Agent::recover_on_restart() {
    // Observational: the server's RUNNING view plus local artifacts decide
    // what to do. No evidence means heartbeat and wait; recovery authority
    // for abandoned work stays administrative.
    const auto resp =
        client_.query_tasks("state=RUNNING&owner=" + config_.agent_id);
    if (!resp.ok() || !resp.body.is_array()) return;
    std::lock_guard lock(mu_);
    for (const auto& t : resp.body) {
        const auto id = t.value("task_id", "");
        if (id.empty()) continue;
        Owned o;
        o.task_id = id;
        o.run_dir = config_.work_dir / id;
        o.job_id = std::nullopt;  // backend state did not survive the restart
        owned_[id] = std::move(o);
    }
}

}  // namespace vqpu
