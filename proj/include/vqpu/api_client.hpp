#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vqpu {

// One HTTP call's outcome. status == 0 means the server was unreachable
// (callers back off and retry); any other status carries the parsed body.
struct ApiResponse {
    int status = 0;
    nlohmann::json body;

    bool ok() const { return status >= 200 && status < 300; }
    bool transport_error() const { return status == 0; }
};

// Thin JSON client for the service API; shared by the agent and the CLI.
class ApiClient {
  public:
    ApiClient(std::string base_url, std::string api_key);
    ~ApiClient();

    ApiClient(const ApiClient&) = delete;
    ApiClient& operator=(const ApiClient&) = delete;

    // client surface
    ApiResponse submit_task(const nlohmann::json& request);
    ApiResponse check_task(const nlohmann::json& request);
    ApiResponse get_task(const std::string& task_id);
    ApiResponse query_tasks(const std::string& query);  // e.g. "state=RUNNING&owner=a1"
    ApiResponse cancel(const std::string& task_id);
    ApiResponse requeue(const std::string& task_id);
    ApiResponse force_fail(const std::string& task_id, const nlohmann::json& body);
    ApiResponse stale_tasks(std::optional<double> window_s = std::nullopt);

    ApiResponse put_device(const std::string& device_id, const nlohmann::json& descriptor);
    ApiResponse get_device(const std::string& device_id);
    ApiResponse list_devices();
    ApiResponse cache_stats();

    // agent protocol
    ApiResponse claim(const std::string& agent_id, double wait_s = 0);
    ApiResponse report_running(const std::string& task_id, const std::string& agent_id,
                               const std::string& scheduler_job_id);
    ApiResponse report_completed(const std::string& task_id, const std::string& agent_id,
                                 const nlohmann::json& result);
    ApiResponse report_failed(const std::string& task_id, const std::string& agent_id,
                              const nlohmann::json& error_envelope);
    ApiResponse heartbeat(const std::string& agent_id, const std::vector<std::string>& task_ids);

    const std::string& base_url() const { return base_url_; }
    const std::string& api_key() const { return api_key_; }

  private:
    ApiResponse get(const std::string& path);
    ApiResponse post(const std::string& path, const nlohmann::json& body);
    ApiResponse put(const std::string& path, const nlohmann::json& body);

    std::string base_url_;
    std::string api_key_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vqpu
