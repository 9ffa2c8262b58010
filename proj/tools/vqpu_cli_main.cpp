#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "vqpu/api_client.hpp"
#include "vqpu/fixtures.hpp"
#include "vqpu/task.hpp"

#include "experiments.hpp"

namespace {

using vqpu::ApiClient;
using vqpu::ApiResponse;

struct GlobalOpts {
    std::string server_url;
    std::string api_key;
    bool json = false;
};

int fail_with(const ApiResponse& resp) {
    if (resp.transport_error()) {
        std::cerr << "error: server unreachable\n";
        return 2;
    }
    std::cerr << "error (" << resp.status << "): " << resp.body.dump() << "\n";
    return 1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CLI::ValidationError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void print_task(const nlohmann::json& t, bool as_json) {
    if (as_json) {
        std::cout << t.dump(2) << "\n";
        return;
    }
    std::cout << t.value("task_id", "") << "  " << t.value("state", "") << "  device="
              << t.value("device_id", "") << "  owner="
              << (t.contains("owner") && !t.at("owner").is_null() ? t.at("owner").get<std::string>()
                                                                  : "-")
              << "\n";
}

// Streams /events, printing one line per frame; returns when the connection
// closes or max_events is reached (0 = unbounded).
int watch_events(const GlobalOpts& g, std::optional<uint64_t> from_sequence,
                 const std::string& task_filter, const std::string& device_filter,
                 uint64_t max_events) {
    httplib::Client http(g.server_url);
    http.set_read_timeout(3600, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + g.api_key}};
    std::string path = "/events";
    if (from_sequence) path += "?from_sequence=" + std::to_string(*from_sequence);

    uint64_t seen = 0;
    std::string buffer;
    auto res = http.Get(path, headers, [&](const char* data, size_t len) {
        buffer.append(data, len);
        size_t pos;
        while ((pos = buffer.find("\n\n")) != std::string::npos) {
            const std::string frame = buffer.substr(0, pos);
            buffer.erase(0, pos + 2);
            const auto data_pos = frame.find("data: ");
            if (data_pos == std::string::npos) continue;  // keep-alive comment
            const auto payload = frame.substr(data_pos + 6);
            const auto j = nlohmann::json::parse(payload, nullptr, false);
            if (j.is_discarded()) continue;
            if (!task_filter.empty() && j.value("task_id", "") != task_filter) continue;
            if (!device_filter.empty() && j.value("device_id", "") != device_filter) continue;
            std::cout << j.dump() << "\n";
            std::cout.flush();
            if (max_events && ++seen >= max_events) return false;
        }
        return true;
    });
    (void)res;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual QPU service client"};
    app.require_subcommand(1);

    GlobalOpts g;
    if (const char* v = std::getenv("VQPU_SERVER_URL")) g.server_url = v;
    if (const char* v = std::getenv("VQPU_API_KEY")) g.api_key = v;
    app.add_option("--server", g.server_url, "server URL (env VQPU_SERVER_URL)");
    app.add_option("--api-key", g.api_key, "API key (env VQPU_API_KEY)");
    app.add_flag("--json", g.json, "machine-readable output");

    int exit_code = 0;

    // ---- client verbs ----

    auto* submit = app.add_subcommand("submit", "submit a circuit file");
    std::string submit_device, submit_file, submit_dialect = "nqasm-1";
    uint64_t submit_shots = 1024;
    std::optional<uint64_t> submit_seed;
    submit->add_option("--device", submit_device, "target device id")->required();
    submit->add_option("--shots", submit_shots, "shot count");
    submit->add_option("--seed", submit_seed, "fixed seed");
    submit->add_option("--dialect", submit_dialect, "circuit dialect");
    submit->add_option("circuit", submit_file, "circuit file")->required();
    submit->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        nlohmann::json req = {{"circuit_source", read_file(submit_file)},
                              {"dialect", submit_dialect},
                              {"shots", submit_shots},
                              {"device_id", submit_device}};
        if (submit_seed) req["seed"] = *submit_seed;
        const auto resp = client.submit_task(req);
        if (resp.status != 201) {
            exit_code = fail_with(resp);
            return;
        }
        if (g.json) {
            std::cout << resp.body.dump(2) << "\n";
        } else {
            std::cout << resp.body.value("task_id", "") << "\n";
        }
    });

    auto* check = app.add_subcommand("check", "viability-check a circuit without creating a task");
    check->add_option("--device", submit_device, "target device id")->required();
    check->add_option("--shots", submit_shots, "shot count");
    check->add_option("--dialect", submit_dialect, "circuit dialect");
    check->add_option("circuit", submit_file, "circuit file")->required();
    check->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.check_task({{"circuit_source", read_file(submit_file)},
                                             {"dialect", submit_dialect},
                                             {"shots", submit_shots},
                                             {"device_id", submit_device}});
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        std::cout << resp.body.dump() << "\n";
    });

    auto* status = app.add_subcommand("status", "print a task record");
    std::string task_id;
    status->add_option("task_id", task_id)->required();
    status->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.get_task(task_id);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        print_task(resp.body, g.json);
    });

    auto* result = app.add_subcommand("result", "print a completed task's counts");
    result->add_option("task_id", task_id)->required();
    result->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.get_task(task_id);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        const auto state = resp.body.value("state", "");
        if (state != "COMPLETED" && state != "FAILED") {
            std::cerr << "task " << task_id << " is not terminal (state " << state << ")\n";
            exit_code = 3;
            return;
        }
        if (state == "FAILED") {
            std::cerr << resp.body.at("error").dump(2) << "\n";
            exit_code = 1;
            return;
        }
        std::cout << (g.json ? resp.body.at("result").dump(2)
                             : resp.body.at("result").value("counts", nlohmann::json::object()).dump(2))
                  << "\n";
    });

    auto* cancel = app.add_subcommand("cancel", "cancel a queued or running task");
    cancel->add_option("task_id", task_id)->required();
    cancel->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.cancel(task_id);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        print_task(resp.body, g.json);
    });

    auto* watch = app.add_subcommand("watch", "stream lifecycle events");
    std::string watch_task, watch_device;
    std::optional<uint64_t> watch_from;
    uint64_t watch_max = 0;
    watch->add_option("--task", watch_task, "only events for this task");
    watch->add_option("--device", watch_device, "only events for this device");
    watch->add_option("--from-sequence", watch_from, "replay retained events after this sequence");
    watch->add_option("--max-events", watch_max, "exit after N events (0 = run forever)");
    watch->callback(
        [&] { exit_code = watch_events(g, watch_from, watch_task, watch_device, watch_max); });

    // ---- admin verbs ----

    auto* device = app.add_subcommand("device", "device administration");
    device->require_subcommand(1);

    auto* device_put = device->add_subcommand("put", "create or replace a device from a JSON file");
    std::string device_file, device_id_flag;
    device_put->add_option("file", device_file, "snapshot descriptor JSON")->required();
    device_put->add_option("--id", device_id_flag, "device id (default: device_id field)");
    device_put->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto descriptor = nlohmann::json::parse(read_file(device_file));
        std::string id = device_id_flag.empty() ? descriptor.value("device_id", "") : device_id_flag;
        if (id.empty()) throw CLI::ValidationError("device id missing (use --id)");
        const auto resp = client.put_device(id, descriptor);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        std::cout << resp.body.dump() << "\n";
    });

    auto* device_get = device->add_subcommand("get", "fetch one device snapshot");
    std::string device_id_arg;
    device_get->add_option("device_id", device_id_arg)->required();
    device_get->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.get_device(device_id_arg);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        std::cout << resp.body.dump(2) << "\n";
    });

    auto* device_list = device->add_subcommand("list", "list devices");
    device_list->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.list_devices();
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        if (g.json) {
            std::cout << resp.body.dump(2) << "\n";
        } else {
            for (const auto& d : resp.body)
                std::cout << d.value("device_id", "") << "  v" << d.value("snapshot_version", 0)
                          << "  qubits=" << d.value("num_qubits", 0) << "\n";
        }
    });

    auto* task = app.add_subcommand("task", "task administration");
    task->require_subcommand(1);

    auto* requeue = task->add_subcommand("requeue", "return a stale running task to the queue");
    requeue->add_option("task_id", task_id)->required();
    requeue->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.requeue(task_id);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        print_task(resp.body, g.json);
    });

    auto* force_fail = task->add_subcommand("force-fail", "move a non-terminal task to FAILED");
    std::string ff_code = "FORCE_FAILED", ff_message = "administratively failed";
    force_fail->add_option("task_id", task_id)->required();
    force_fail->add_option("--code", ff_code);
    force_fail->add_option("--message", ff_message);
    force_fail->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.force_fail(task_id, {{"code", ff_code}, {"message", ff_message}});
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        print_task(resp.body, g.json);
    });

    auto* stale = app.add_subcommand("stale", "stale task queries");
    auto* stale_list = stale->add_subcommand("list", "list RUNNING tasks with expired heartbeats");
    std::optional<double> stale_window;
    stale_list->add_option("--window", stale_window, "override the liveness window (seconds)");
    stale_list->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        const auto resp = client.stale_tasks(stale_window);
        if (!resp.ok()) {
            exit_code = fail_with(resp);
            return;
        }
        if (g.json) {
            std::cout << resp.body.dump(2) << "\n";
        } else {
            for (const auto& t : resp.body) print_task(t, false);
        }
    });

    // ---- run-directory garbage collection ----

    auto* gc = app.add_subcommand("gc", "delete run directories of terminal tasks");
    std::string gc_work_dir;
    bool gc_dry_run = false;
    gc->add_option("--work-dir", gc_work_dir, "agent work directory")->required();
    gc->add_flag("--dry-run", gc_dry_run, "list what would be removed");
    gc->callback([&] {
        ApiClient client(g.server_url, g.api_key);
        size_t removed = 0, kept = 0;
        for (const auto& entry : std::filesystem::directory_iterator(gc_work_dir)) {
            if (!entry.is_directory()) continue;
            const auto task_id = entry.path().filename().string();
            const auto resp = client.get_task(task_id);
            const auto state = resp.ok() ? resp.body.value("state", "") : "";
            const bool terminal =
                state == "COMPLETED" || state == "FAILED" || state == "CANCELLED";
            if (!terminal) {
                ++kept;
                continue;
            }
            if (gc_dry_run) {
                std::cout << "would remove " << entry.path().string() << " (" << state << ")\n";
            } else {
                std::filesystem::remove_all(entry.path());
            }
            ++removed;
        }
        std::cout << (gc_dry_run ? "candidates: " : "removed: ") << removed << ", kept: " << kept
                  << "\n";
    });

    // ---- fixtures ----

    auto* fixture = app.add_subcommand("fixture", "print a packaged synthetic device descriptor");
    std::string fixture_name, fixture_id;
    fixture->add_option("name", fixture_name, "hex20-noisy | hex20-ideal")->required();
    fixture->add_option("--id", fixture_id, "override the device id");
    fixture->callback([&] {
        vqpu::DeviceSnapshot snap;
        if (fixture_name == "hex20-noisy") {
            snap = vqpu::fixtures::hex20_noisy(fixture_id.empty() ? fixture_name : fixture_id);
        } else if (fixture_name == "hex20-ideal") {
            snap = vqpu::fixtures::hex20_ideal(fixture_id.empty() ? fixture_name : fixture_id);
        } else {
            throw CLI::ValidationError("unknown fixture: " + fixture_name);
        }
        std::cout << vqpu::snapshot_to_json(snap).dump(2) << "\n";
    });

    // ---- experiments ----

    register_experiments(app, g.server_url, g.api_key, exit_code);

    CLI11_PARSE(app, argc, argv);
    return exit_code;
}
