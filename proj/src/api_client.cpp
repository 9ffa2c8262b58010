#include "vqpu/api_client.hpp"

#include <httplib.h>

namespace vqpu {

struct ApiClient::Impl {
    httplib::Client http;
    httplib::Headers headers;

    Impl(const std::string& url, const std::string& key) : http(url) {
        http.set_connection_timeout(5, 0);
        http.set_read_timeout(40, 0);
        http.set_write_timeout(10, 0);
        headers = {{"Authorization", "Bearer " + key}};
    }
};

namespace {

ApiResponse to_response(const httplib::Result& r) {
    ApiResponse out;
    if (!r) return out;  // transport error, status stays 0
    out.status = r->status;
    if (!r->body.empty()) {
        auto j = nlohmann::json::parse(r->body, nullptr, false);
        if (!j.is_discarded()) out.body = std::move(j);
    }
    return out;
}

}  // namespace

ApiClient::ApiClient(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      impl_(std::make_unique<Impl>(base_url_, api_key_)) {}

ApiClient::~ApiClient() = default;

ApiResponse ApiClient::get(const std::string& path) {
    return to_response(impl_->http.Get(path, impl_->headers));
}

ApiResponse ApiClient::post(const std::string& path, const nlohmann::json& body) {
    return to_response(impl_->http.Post(path, impl_->headers, body.dump(), "application/json"));
}

ApiResponse ApiClient::put(const std::string& path, const nlohmann::json& body) {
    return to_response(impl_->http.Put(path, impl_->headers, body.dump(), "application/json"));
}

ApiResponse ApiClient::submit_task(const nlohmann::json& request) { return post("/tasks", request); }

ApiResponse ApiClient::check_task(const nlohmann::json& request) {
    return post("/tasks/check", request);
}

ApiResponse ApiClient::get_task(const std::string& task_id) { return get("/tasks/" + task_id); }

ApiResponse ApiClient::query_tasks(const std::string& query) {
    return get(query.empty() ? "/tasks" : "/tasks?" + query);
}

ApiResponse ApiClient::cancel(const std::string& task_id) {
    return post("/tasks/" + task_id + "/cancel", nlohmann::json::object());
}

ApiResponse ApiClient::requeue(const std::string& task_id) {
    return post("/admin/tasks/" + task_id + "/requeue", nlohmann::json::object());
}

ApiResponse ApiClient::force_fail(const std::string& task_id, const nlohmann::json& body) {
    return post("/admin/tasks/" + task_id + "/force-fail", body);
}

ApiResponse ApiClient::stale_tasks(std::optional<double> window_s) {
    std::string path = "/tasks/stale";
    if (window_s) path += "?window_s=" + std::to_string(*window_s);
    return get(path);
}

ApiResponse ApiClient::put_device(const std::string& device_id, const nlohmann::json& descriptor) {
    return put("/admin/devices/" + device_id, descriptor);
}

ApiResponse ApiClient::get_device(const std::string& device_id) {
    return get("/devices/" + device_id);
}

ApiResponse ApiClient::list_devices() { return get("/devices"); }

ApiResponse ApiClient::cache_stats() { return get("/admin/cache/stats"); }

ApiResponse ApiClient::claim(const std::string& agent_id, double wait_s) {
    std::string path = "/agent/claim";
    if (wait_s > 0) path += "?wait_s=" + std::to_string(wait_s);
    return post(path, {{"agent_id", agent_id}});
}

ApiResponse ApiClient::report_running(const std::string& task_id, const std::string& agent_id,
                                      const std::string& scheduler_job_id) {
    return post("/agent/tasks/" + task_id + "/running",
                {{"agent_id", agent_id}, {"scheduler_job_id", scheduler_job_id}});
}

ApiResponse ApiClient::report_completed(const std::string& task_id, const std::string& agent_id,
                                        const nlohmann::json& result) {
    return post("/agent/tasks/" + task_id + "/completed",
                {{"agent_id", agent_id}, {"result", result}});
}

ApiResponse ApiClient::report_failed(const std::string& task_id, const std::string& agent_id,
                                     const nlohmann::json& error_envelope) {
    return post("/agent/tasks/" + task_id + "/failed",
                {{"agent_id", agent_id}, {"error", error_envelope}});
}

ApiResponse ApiClient::heartbeat(const std::string& agent_id,
                                 const std::vector<std::string>& task_ids) {
    return post("/agent/heartbeat", {{"agent_id", agent_id}, {"task_ids", task_ids}});
}

}  // namespace vqpu
