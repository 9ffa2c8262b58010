#include "vqpu/server.hpp"

#include <cstdlib>
#include <cstring>

#include <httplib.h>

#include "vqpu/circuit.hpp"
#include "vqpu/payload.hpp"

namespace vqpu {

namespace {

int status_for(const std::string& code) {
    using namespace codes;
    if (code == kAuthFailed) return 401;
    if (code == kNotOwner) return 403;
    if (code == kUnknownDevice || code == kUnknownTask) return 404;
    if (code == kIllegalTransition) return 409;
    if (code == kParseError || code == kUnsupportedDialect || code == kPayloadMalformed)
        return 400;
    if (code == kUnsupportedGate || code == kQubitOffline || code == kQubitOutOfRange ||
        code == kTopologyViolation || code == kSnapshotInvalid)
        return 422;
    return 500;
}

void reply_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const ErrorEnvelope& env) {
    reply_json(res, status_for(env.code), env.to_json());
}

void reply_error(httplib::Response& res, const Error& e) {
    reply_error(res, ErrorEnvelope::from(e));
}

std::optional<nlohmann::json> body_json(const httplib::Request& req, httplib::Response& res) {
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        reply_error(res, ErrorEnvelope::make(codes::kPayloadMalformed,
                                             "request body must be a JSON object"));
        return std::nullopt;
    }
    return j;
}

std::string sse_frame(const LifecycleEvent& ev) {
    std::string out;
    out += "id: " + std::to_string(ev.sequence) + "\n";
    out += "event: " + ev.event_type + "\n";
    out += "data: " + ev.to_json().dump() + "\n\n";
    return out;
}

}  // namespace

ServerConfig ServerConfig::from_env() {
    ServerConfig cfg;
    if (const char* addr = std::getenv("VQPU_BIND_ADDR")) {
        const std::string s = addr;
        const auto colon = s.rfind(':');
        if (colon != std::string::npos) {
            cfg.bind_host = s.substr(0, colon);
            cfg.bind_port = std::atoi(s.c_str() + colon + 1);
        } else {
            cfg.bind_host = s;
        }
    }
    if (const char* v = std::getenv("VQPU_STORE_PATH")) cfg.store_path = v;
    if (const char* v = std::getenv("VQPU_EVENT_LOG_PATH")) cfg.event_log_path = v;
    if (const char* v = std::getenv("VQPU_CACHE_TTL_S")) cfg.cache_ttl_s = std::atof(v);
    if (const char* v = std::getenv("VQPU_LIVENESS_WINDOW_S")) cfg.liveness_window_s = std::atof(v);
    if (const char* v = std::getenv("VQPU_API_KEYS_FILE")) cfg.api_keys_file = v;
    return cfg;
}

ControlPlane::ControlPlane(ServerConfig config)
    : ControlPlane(std::move(config), AuthTable{}) {
    if (!config_.api_keys_file.empty()) auth_ = AuthTable::from_file(config_.api_keys_file);
}

ControlPlane::ControlPlane(ServerConfig config, AuthTable auth)
    : config_(std::move(config)),
      auth_(std::move(auth)),
      cache_(devices_, config_.cache_ttl_s),
      events_(std::make_unique<EventLog>(config_.event_log_path)),
      broker_(config_.sse_queue_capacity, config_.sse_replay_window) {
    broker_.seed_window(events_->tail(config_.sse_replay_window));
    events_->set_sink([this](const LifecycleEvent& ev) { broker_.publish(ev); });
    const auto audit_path = config_.store_path.string() + ".audit.jsonl";
    tasks_ = std::make_unique<TaskStore>(config_.store_path, audit_path, *events_);
    http_ = std::make_unique<httplib::Server>();
    install_routes();
}

ControlPlane::~ControlPlane() { stop(); }

int ControlPlane::start() {
    int port = config_.bind_port;
    if (port == 0) {
        port = http_->bind_to_any_port(config_.bind_host);
        if (port <= 0) throw Error(codes::kStoreError, "failed to bind ephemeral port");
    } else {
        if (!http_->bind_to_port(config_.bind_host, port))
            throw Error(codes::kStoreError,
                        "failed to bind " + config_.bind_host + ":" + std::to_string(port));
    }
    running_ = true;
    serve_thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return port;
}

void ControlPlane::stop() {
    if (!running_.exchange(false)) return;
    broker_.shutdown();  // unblocks SSE handler threads so stop() can join
    http_->stop();
    if (serve_thread_.joinable()) serve_thread_.join();
}

void ControlPlane::install_routes() {
    auto& svr = *http_;
    svr.new_task_queue = [] { return new httplib::ThreadPool(24); };

    // ---- auth -----------------------------------------------------------

    auto principal_of = [this](const httplib::Request& req) -> std::optional<Principal> {
        const auto header = req.get_header_value("Authorization");
        constexpr const char* kPrefix = "Bearer ";
        if (header.rfind(kPrefix, 0) != 0) return std::nullopt;
        return auth_.authenticate(header.substr(7));
    };

    auto require_auth = [principal_of](const httplib::Request& req,
                                       httplib::Response& res) -> std::optional<Principal> {
        auto p = principal_of(req);
        if (!p)
            reply_error(res, ErrorEnvelope::make(codes::kAuthFailed, "missing or unknown API key"));
        return p;
    };

    auto require_role = [require_auth](const httplib::Request& req, httplib::Response& res,
                                       std::initializer_list<Role> roles)
        -> std::optional<Principal> {
        auto p = require_auth(req, res);
        if (!p) return std::nullopt;
        for (Role r : roles) {
            if (p->role == r) return p;
        }
        auto env = ErrorEnvelope::make(codes::kAuthFailed, "insufficient role");
        res.status = 403;
        res.set_content(env.to_json().dump(), "application/json");
        return std::nullopt;
    };

    // ---- validation shared by submit and check --------------------------

    struct Validated {
        NewTask fields;
        DeviceSnapshot snapshot;  // cached view used for admissibility
    };
    auto validate_submission = [this](const nlohmann::json& j,
                                      const Principal& p) -> Validated {
        Validated v;
        try {
            v.fields.circuit_source = j.at("circuit_source").get<std::string>();
            v.fields.dialect = j.at("dialect").get<std::string>();
            v.fields.shots = j.at("shots").get<uint64_t>();
            v.fields.device_id = j.at("device_id").get<std::string>();
            if (j.contains("seed") && !j.at("seed").is_null())
                v.fields.seed = j.at("seed").get<uint64_t>();
        } catch (const nlohmann::json::exception& ex) {
            throw Error(codes::kPayloadMalformed, std::string("bad submission: ") + ex.what());
        }
        if (v.fields.shots == 0) throw Error(codes::kPayloadMalformed, "shots must be positive");
        v.fields.created_by = p.id;

        // Bounded-staleness cached view is sufficient for admission; the
        // execution contract is bound from authoritative state at claim.
        auto snap = cache_.get(v.fields.device_id);
        if (!snap) throw Error(codes::kUnknownDevice, "no such device: " + v.fields.device_id);

        const Circuit circuit = parse(v.fields.circuit_source, v.fields.dialect);
        const auto verdict = check_admissibility(circuit, *snap);
        if (!verdict.ok)
            throw Error(verdict.code, verdict.message, nlohmann::json{{"line", verdict.line}});
        v.snapshot = std::move(*snap);
        return v;
    };

    // ---- client surface --------------------------------------------------

    svr.Post("/tasks", [this, require_auth, validate_submission](const httplib::Request& req,
                                                                 httplib::Response& res) {
        auto p = require_auth(req, res);
        if (!p) return;
        auto j = body_json(req, res);
        if (!j) return;
        try {
            const auto v = validate_submission(*j, *p);
            const auto record = tasks_->enqueue(v.fields);
            reply_json(res, 201, record.to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/tasks/check", [require_auth, validate_submission](const httplib::Request& req,
                                                                 httplib::Response& res) {
        auto p = require_auth(req, res);
        if (!p) return;
        auto j = body_json(req, res);
        if (!j) return;
        try {
            const auto v = validate_submission(*j, *p);
            reply_json(res, 200,
                       {{"ok", true},
                        {"device_id", v.snapshot.device_id},
                        {"snapshot_version", v.snapshot.snapshot_version}});
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Get("/tasks/stale", [this, require_auth](const httplib::Request& req,
                                                 httplib::Response& res) {
        if (!require_auth(req, res)) return;
        double window = config_.liveness_window_s;
        if (req.has_param("window_s")) window = std::atof(req.get_param_value("window_s").c_str());
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : tasks_->stale_tasks(window)) arr.push_back(r.to_json());
        reply_json(res, 200, arr);
    });

    svr.Get("/tasks", [this, require_auth](const httplib::Request& req, httplib::Response& res) {
        if (!require_auth(req, res)) return;
        TaskStore::Filter f;
        try {
            if (req.has_param("state")) f.state = task_state_from_string(req.get_param_value("state"));
        } catch (const Error& e) {
            reply_error(res, e);
            return;
        }
        if (req.has_param("device")) f.device_id = req.get_param_value("device");
        if (req.has_param("owner")) f.owner = req.get_param_value("owner");
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : tasks_->query(f)) arr.push_back(r.to_json());
        reply_json(res, 200, arr);
    });

    svr.Get("/tasks/:id", [this, require_auth](const httplib::Request& req,
                                               httplib::Response& res) {
        if (!require_auth(req, res)) return;
        const auto r = tasks_->get(req.path_params.at("id"));
        if (!r) {
            reply_error(res, ErrorEnvelope::make(codes::kUnknownTask, "no such task"));
            return;
        }
        reply_json(res, 200, r->to_json());
    });

    svr.Post("/tasks/:id/cancel", [this, require_auth](const httplib::Request& req,
                                                       httplib::Response& res) {
        auto p = require_auth(req, res);
        if (!p) return;
        try {
            const auto id = req.path_params.at("id");
            const auto r = tasks_->get(id);
            if (!r) throw Error(codes::kUnknownTask, "no such task");
            if (p->role != Role::Admin && r->created_by != p->id)
                throw Error(codes::kNotOwner, "only the submitting principal or an admin may cancel");
            reply_json(res, 200, tasks_->cancel(id).to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/admin/tasks/:id/requeue", [this, require_role](const httplib::Request& req,
                                                              httplib::Response& res) {
        if (!require_role(req, res, {Role::Admin})) return;
        try {
            reply_json(res, 200, tasks_->requeue(req.path_params.at("id")).to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/admin/tasks/:id/force-fail", [this, require_role](const httplib::Request& req,
                                                                 httplib::Response& res) {
        if (!require_role(req, res, {Role::Admin})) return;
        try {
            std::string code = codes::kForceFailed;
            std::string message = "administratively failed";
            if (!req.body.empty()) {
                const auto j = nlohmann::json::parse(req.body, nullptr, false);
                if (j.is_object()) {
                    code = j.value("code", code);
                    message = j.value("message", message);
                }
            }
            reply_json(res, 200,
                       tasks_->force_fail(req.path_params.at("id"),
                                          ErrorEnvelope::make(code, message))
                           .to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    // ---- devices ---------------------------------------------------------

    svr.Get("/devices", [this, require_auth](const httplib::Request& req, httplib::Response& res) {
        if (!require_auth(req, res)) return;
        auto arr = nlohmann::ordered_json::array();
        for (const auto& snap : cache_.list()) arr.push_back(snapshot_to_json(snap));
        reply_json(res, 200, arr);
    });

    svr.Get("/devices/:id", [this, require_auth](const httplib::Request& req,
                                                 httplib::Response& res) {
        if (!require_auth(req, res)) return;
        const auto snap = cache_.get(req.path_params.at("id"));
        if (!snap) {
            reply_error(res, ErrorEnvelope::make(codes::kUnknownDevice, "no such device"));
            return;
        }
        reply_json(res, 200, snapshot_to_json(*snap));
    });

    svr.Put("/admin/devices/:id", [this, require_role](const httplib::Request& req,
                                                       httplib::Response& res) {
        if (!require_role(req, res, {Role::Admin})) return;
        auto j = body_json(req, res);
        if (!j) return;
        try {
            const auto id = req.path_params.at("id");
            auto full = *j;
            full["device_id"] = id;  // path id wins; body id is ignored
            full["snapshot_version"] = 0;
            full["captured_at"] = "";
            DeviceSnapshot descriptor = snapshot_from_json(full);
            const int64_t version = devices_.put(id, std::move(descriptor));
            // Invalidate before returning so any read ordered after this
            // call observes the mutation.
            cache_.invalidate(id);
            events_->append(events::kDeviceUpdated, "", id,
                            {{"snapshot_version", version}});
            reply_json(res, 200, {{"device_id", id}, {"snapshot_version", version}});
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Get("/admin/cache/stats", [this, require_role](const httplib::Request& req,
                                                       httplib::Response& res) {
        if (!require_role(req, res, {Role::Admin})) return;
        const auto s = cache_.stats();
        reply_json(res, 200,
                   {{"hits", s.hits}, {"misses", s.misses}, {"invalidations", s.invalidations}});
    });

    // ---- agent protocol ---------------------------------------------------

    svr.Post("/agent/claim", [this, require_role](const httplib::Request& req,
                                                  httplib::Response& res) {
        if (!require_role(req, res, {Role::Agent, Role::Admin})) return;
        auto j = body_json(req, res);
        if (!j) return;
        const std::string agent_id = j->value("agent_id", "");
        if (agent_id.empty()) {
            reply_error(res, ErrorEnvelope::make(codes::kPayloadMalformed, "agent_id required"));
            return;
        }
        double wait_s = 0.0;
        if (req.has_param("wait_s"))
            wait_s = std::min(25.0, std::atof(req.get_param_value("wait_s").c_str()));

        const auto provider = [this](const std::string& device_id) {
            return devices_.get_authoritative(device_id);
        };
        try {
            const double deadline = monotonic_seconds() + wait_s;
            for (;;) {
                if (auto grant = tasks_->claim(agent_id, provider)) {
                    nlohmann::ordered_json body;
                    body["task"] = grant->task.to_json();
                    body["bound_snapshot"] = snapshot_to_json(grant->snapshot);
                    reply_json(res, 200, body);
                    return;
                }
                const double remaining = deadline - monotonic_seconds();
                if (remaining <= 0) break;
                tasks_->wait_for_queued(std::min(remaining, 1.0));
            }
            res.status = 204;
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/agent/tasks/:id/running", [this, require_role](const httplib::Request& req,
                                                              httplib::Response& res) {
        if (!require_role(req, res, {Role::Agent, Role::Admin})) return;
        auto j = body_json(req, res);
        if (!j) return;
        try {
            reply_json(res, 200,
                       tasks_
                           ->report_running(req.path_params.at("id"), j->value("agent_id", ""),
                                            j->value("scheduler_job_id", ""))
                           .to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/agent/tasks/:id/completed", [this, require_role](const httplib::Request& req,
                                                                httplib::Response& res) {
        if (!require_role(req, res, {Role::Agent, Role::Admin})) return;
        auto j = body_json(req, res);
        if (!j) return;
        try {
            if (!j->contains("result"))
                throw Error(codes::kPayloadMalformed, "completion report requires result");
            reply_json(res, 200,
                       tasks_
                           ->report_completed(req.path_params.at("id"), j->value("agent_id", ""),
                                              j->at("result"))
                           .to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/agent/tasks/:id/failed", [this, require_role](const httplib::Request& req,
                                                             httplib::Response& res) {
        if (!require_role(req, res, {Role::Agent, Role::Admin})) return;
        auto j = body_json(req, res);
        if (!j) return;
        try {
            if (!j->contains("error"))
                throw Error(codes::kPayloadMalformed, "failure report requires error");
            reply_json(res, 200,
                       tasks_
                           ->report_failed(req.path_params.at("id"), j->value("agent_id", ""),
                                           ErrorEnvelope::from_json(j->at("error")))
                           .to_json());
        } catch (const Error& e) {
            reply_error(res, e);
        }
    });

    svr.Post("/agent/heartbeat", [this, require_role](const httplib::Request& req,
                                                      httplib::Response& res) {
        if (!require_role(req, res, {Role::Agent, Role::Admin})) return;
        auto j = body_json(req, res);
        if (!j) return;
        const std::string agent_id = j->value("agent_id", "");
        std::vector<std::string> ids;
        if (j->contains("task_ids")) {
            for (const auto& id : j->at("task_ids")) ids.push_back(id.get<std::string>());
        }
        const auto ack = tasks_->heartbeat(agent_id, ids);
        nlohmann::ordered_json marks = nlohmann::ordered_json::object();
        for (const auto& [id, mark] : ack.marks) marks[id] = mark;
        reply_json(res, 200, {{"acks", marks}});
    });

    // ---- event stream ------------------------------------------------------

    svr.Get("/events", [this, require_auth](const httplib::Request& req, httplib::Response& res) {
        if (!require_auth(req, res)) return;

        std::optional<uint64_t> replay_from;
        if (req.has_param("from_sequence")) {
            replay_from = std::strtoull(req.get_param_value("from_sequence").c_str(), nullptr, 10);
        } else if (req.has_header("Last-Event-ID")) {
            replay_from = std::strtoull(req.get_header_value("Last-Event-ID").c_str(), nullptr, 10);
        }

        auto subscription = std::make_shared<SseBroker::Subscription>(broker_.subscribe(replay_from));
        const double keepalive = config_.sse_keepalive_s;
        auto broker = &broker_;

        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [subscription, keepalive, broker](size_t, httplib::DataSink& sink) {
                auto& sub = subscription->subscriber;
                if (subscription->window_exceeded) {
                    const auto env = ErrorEnvelope::make(
                        codes::kReplayWindowExceeded,
                        "requested sequence predates the retained window",
                        nlohmann::json{{"window_start", subscription->window_start}});
                    std::string frame = "event: error\ndata: " + env.to_json().dump() + "\n\n";
                    if (!sink.write(frame.data(), frame.size())) return false;
                }
                for (const auto& ev : subscription->replay) {
                    const auto frame = sse_frame(ev);
                    if (!sink.write(frame.data(), frame.size())) {
                        broker->unsubscribe(sub);
                        return false;
                    }
                }
                subscription->replay.clear();
                subscription->window_exceeded = false;

                for (;;) {
                    LifecycleEvent ev;
                    switch (sub->pop(keepalive, ev)) {
                        case SseBroker::Subscriber::Pop::Event: {
                            const auto frame = sse_frame(ev);
                            if (!sink.write(frame.data(), frame.size())) {
                                broker->unsubscribe(sub);
                                return false;
                            }
                            break;
                        }
                        case SseBroker::Subscriber::Pop::Timeout: {
                            constexpr const char* kKeepAlive = ": keep-alive\n\n";
                            if (!sink.write(kKeepAlive, strlen(kKeepAlive))) {
                                broker->unsubscribe(sub);
                                return false;
                            }
                            break;
                        }
                        case SseBroker::Subscriber::Pop::Closed:
                            broker->unsubscribe(sub);
                            return false;
                    }
                }
            });
    });
}

}  // namespace vqpu
