#include "experiments.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "vqpu/agent.hpp"
#include "vqpu/api_client.hpp"
#include "vqpu/fixtures.hpp"
#include "vqpu/oracle.hpp"
#include "vqpu/sim.hpp"
#include "vqpu/util.hpp"

namespace {

using nlohmann::json;
using namespace vqpu;

// ---- shared plumbing -------------------------------------------------------

struct ExpOpts {
    std::string out_path;
    std::string agent_bin;
    std::string runner_bin;
    std::string work_dir;
};

std::string self_dir() {
    char buf[4096];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (n <= 0) return ".";
    buf[n] = '\0';
    return std::filesystem::path(buf).parent_path().string();
}

void add_common_options(CLI::App* cmd, ExpOpts& opts) {
    cmd->add_option("--out", opts.out_path, "report output path (JSON)");
    cmd->add_option("--agent-bin", opts.agent_bin, "vqpu-agent binary (default: alongside this one)");
    cmd->add_option("--runner-bin", opts.runner_bin, "vqpu-runner binary");
    cmd->add_option("--work-dir", opts.work_dir, "scratch directory");
}

void resolve_opts(ExpOpts& opts, const std::string& name) {
    if (opts.agent_bin.empty()) opts.agent_bin = self_dir() + "/vqpu-agent";
    if (opts.runner_bin.empty()) opts.runner_bin = self_dir() + "/vqpu-runner";
    if (opts.work_dir.empty())
        opts.work_dir = (std::filesystem::temp_directory_path() /
                         ("vqpu-exp-" + name + "-" + random_hex(4)))
                            .string();
    std::filesystem::create_directories(opts.work_dir);
}

pid_t spawn_agent(const std::string& agent_bin, const std::filesystem::path& config_path) {
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
        ::execl(agent_bin.c_str(), agent_bin.c_str(), config_path.c_str(), (char*)nullptr);
        _exit(127);
    }
    return pid;
}

void kill_agent(pid_t pid, int sig = SIGKILL) {
    if (pid <= 0) return;
    ::kill(pid, sig);
    int status = 0;
    ::waitpid(pid, &status, 0);
}

AgentConfig base_agent_config(const std::string& server_url, const std::string& api_key,
                              const ExpOpts& opts, const std::string& agent_id) {
    AgentConfig cfg;
    cfg.server_url = server_url;
    cfg.api_key = api_key;
    cfg.agent_id = agent_id;
    cfg.poll_interval_s = 0.1;
    cfg.heartbeat_interval_s = 1.0;
    cfg.max_slots = 4;
    cfg.work_dir = std::filesystem::path(opts.work_dir) / agent_id;
    cfg.runner_bin = opts.runner_bin;
    return cfg;
}

std::filesystem::path write_agent_config(const ExpOpts& opts, const AgentConfig& cfg) {
    const auto path = std::filesystem::path(opts.work_dir) / (cfg.agent_id + ".json");
    std::ofstream out(path);
    out << cfg.to_json().dump(2) << "\n";
    return path;
}

bool wait_all_terminal(ApiClient& client, const std::vector<std::string>& ids, double timeout_s,
                       const std::string& want_state = "COMPLETED") {
    const double deadline = monotonic_seconds() + timeout_s;
    while (monotonic_seconds() < deadline) {
        size_t done = 0;
        for (const auto& id : ids) {
            const auto resp = client.get_task(id);
            if (resp.ok() && resp.body.value("state", "") == want_state) ++done;
        }
        if (done == ids.size()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return false;
}

// Replays the retained event window over SSE and returns the collected
// events once the stream goes quiet.
std::vector<json> fetch_events(const std::string& server_url, const std::string& api_key,
                               double quiesce_s = 1.0) {
    httplib::Client http(server_url);
    http.set_read_timeout(static_cast<time_t>(quiesce_s),
                          static_cast<time_t>((quiesce_s - std::floor(quiesce_s)) * 1e6));
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key}};
    std::vector<json> events;
    std::string buffer;
    http.Get("/events?from_sequence=0", headers, [&](const char* data, size_t len) {
        buffer.append(data, len);
        size_t pos;
        while ((pos = buffer.find("\n\n")) != std::string::npos) {
            const std::string frame = buffer.substr(0, pos);
            buffer.erase(0, pos + 2);
            const auto data_pos = frame.find("data: ");
            if (data_pos == std::string::npos) continue;
            const auto j = json::parse(frame.substr(data_pos + 6), nullptr, false);
            if (!j.is_discarded()) events.push_back(j);
        }
        return true;  // read until the quiesce timeout closes the stream
    });
    return events;
}

double iso_seconds(const std::string& iso) {
    const auto t = parse_iso8601(iso);
    if (!t) return 0;
    return std::chrono::duration<double>(t->time_since_epoch()).count();
}

int finish_report(const ExpOpts& opts, const std::string& name, json report, bool pass) {
    report["experiment"] = name;
    report["pass"] = pass;
    if (!opts.out_path.empty()) {
        std::ofstream out(opts.out_path);
        out << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    std::cout << (pass ? "PASS" : "FAIL") << " exp " << name << "\n";
    return pass ? 0 : 1;
}

double tv_against_all_zero(const std::map<std::string, uint64_t>& counts, size_t width) {
    const auto dist = counts_to_distribution(counts);
    Distribution reference{{std::string(width, '0'), 1.0}};
    return total_variation_distance(dist, reference);
}

std::map<std::string, uint64_t> counts_from_record(const json& record) {
    std::map<std::string, uint64_t> counts;
    for (const auto& [key, n] : record.at("result").at("counts").items())
        counts[key] = n.get<uint64_t>();
    return counts;
}

// ---- exp binding -------------------------------------------------------------

int exp_binding(const std::string& server_url, const std::string& api_key, ExpOpts opts) {
    resolve_opts(opts, "binding");
    ApiClient client(server_url, api_key);
    const std::string device_id = "expb-hex20";

    auto resp = client.put_device(device_id, snapshot_to_json(fixtures::hex20_noisy(device_id)));
    if (!resp.ok()) {
        std::cerr << "device put failed: " << resp.body.dump() << "\n";
        return 1;
    }

    const auto source = fixtures::amplified_identity_source(16);
    std::vector<std::string> ids;
    for (int i = 0; i < 8; ++i) {
        const auto r = client.submit_task({{"circuit_source", source},
                                           {"dialect", "nqasm-1"},
                                           {"shots", 8192},
                                           {"device_id", device_id},
                                           {"seed", 1000 + i}});
        if (r.status != 201) {
            std::cerr << "submit failed: " << r.body.dump() << "\n";
            return 1;
        }
        ids.push_back(r.body.at("task_id").get<std::string>());
    }

    // administrative zero of the same device, before any claim
    std::this_thread::sleep_for(std::chrono::seconds(1));
    resp = client.put_device(device_id, snapshot_to_json(fixtures::hex20_ideal(device_id)));
    if (!resp.ok()) return 1;

    auto cfg = base_agent_config(server_url, api_key, opts, "expb-agent");
    cfg.backend.kind = BackendConfig::Kind::Simulated;
    cfg.backend.plan.capacity = 4;
    cfg.backend.plan.queue_delay = {QueueDelay::Kind::Fixed, 2.0, 0, 0};
    const pid_t agent = spawn_agent(opts.agent_bin, write_agent_config(opts, cfg));

    const bool all_done = wait_all_terminal(client, ids, 55.0);

    json tasks = json::array();
    bool pass = all_done;
    for (const auto& id : ids) {
        const auto r = client.get_task(id);
        if (!r.ok() || r.body.value("state", "") != "COMPLETED") {
            pass = false;
            continue;
        }
        const auto counts = counts_from_record(r.body);
        const double tv = tv_against_all_zero(counts, 2);
        const double p00 = counts.count("00")
                               ? static_cast<double>(counts.at("00")) / 8192.0
                               : 0.0;
        const int64_t bound_version = r.body.at("bound_snapshot").value("snapshot_version", 0);
        tasks.push_back({{"task_id", id},
                         {"tv", tv},
                         {"p00", p00},
                         {"bound_snapshot_version", bound_version}});
        if (tv != 0.0 || p00 != 1.0 || bound_version != 2) pass = false;
    }
    kill_agent(agent, SIGTERM);

    json report;
    report["tasks"] = tasks;
    report["expectation"] = "8/8 post-mutation ideal snapshot, TV=0, p(00)=1.0";
    return finish_report(opts, "binding", report, pass);
}

// ---- exp fidelity --------------------------------------------------------------

int exp_fidelity(const std::string& server_url, const std::string& api_key, ExpOpts opts) {
    resolve_opts(opts, "fidelity");
    ApiClient client(server_url, api_key);
    const std::string noisy_id = "expf-noisy";
    const std::string ideal_id = "expf-ideal";

    if (!client.put_device(noisy_id, snapshot_to_json(fixtures::hex20_noisy(noisy_id))).ok())
        return 1;
    if (!client.put_device(ideal_id, snapshot_to_json(fixtures::hex20_ideal(ideal_id))).ok())
        return 1;

    const int reps = 16;
    const uint64_t shots = 8192;
    const auto source = fixtures::amplified_identity_source(reps);

    // independent reference: exact Kraus evolution under the fixture noise
    const auto circuit = parse(source, kSupportedDialect);
    const auto noise = build_noise_model(fixtures::hex20_noisy(noisy_id));
    const auto oracle = density_oracle(circuit, noise);
    const double tv_oracle = total_variation_distance(oracle, Distribution{{"00", 1.0}});
    const double sigma = std::sqrt(tv_oracle * (1 - tv_oracle) / static_cast<double>(shots));

    std::vector<std::string> ids;
    std::vector<bool> is_noisy;
    for (int i = 0; i < 16; ++i) {
        const std::string device = (i % 2 == 0) ? noisy_id : ideal_id;
        const auto r = client.submit_task({{"circuit_source", source},
                                           {"dialect", "nqasm-1"},
                                           {"shots", shots},
                                           {"device_id", device},
                                           {"seed", 2000 + i}});
        if (r.status != 201) return 1;
        ids.push_back(r.body.at("task_id").get<std::string>());
        is_noisy.push_back(i % 2 == 0);
    }

    auto cfg = base_agent_config(server_url, api_key, opts, "expf-agent");
    cfg.backend.plan.capacity = 4;
    const pid_t agent = spawn_agent(opts.agent_bin, write_agent_config(opts, cfg));
    const bool all_done = wait_all_terminal(client, ids, 150.0);

    bool pass = all_done;
    json tasks = json::array();
    double noisy_tv_sum = 0;
    int noisy_count = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
        const auto r = client.get_task(ids[i]);
        if (!r.ok() || r.body.value("state", "") != "COMPLETED") {
            pass = false;
            continue;
        }
        const double tv = tv_against_all_zero(counts_from_record(r.body), 2);
        tasks.push_back({{"task_id", ids[i]}, {"noisy", static_cast<bool>(is_noisy[i])}, {"tv", tv}});
        if (is_noisy[i]) {
            noisy_tv_sum += tv;
            ++noisy_count;
            if (std::abs(tv - tv_oracle) > 3 * sigma) pass = false;
        } else if (tv != 0.0) {
            pass = false;
        }
    }
    kill_agent(agent, SIGTERM);

    json report;
    report["tasks"] = tasks;
    report["tv_oracle"] = tv_oracle;
    report["sigma"] = sigma;
    report["noisy_tv_mean"] = noisy_count ? noisy_tv_sum / noisy_count : 0.0;
    return finish_report(opts, "fidelity", report, pass);
}

// ---- exp latency ----------------------------------------------------------------

int exp_latency(const std::string& server_url, const std::string& api_key, ExpOpts opts) {
    resolve_opts(opts, "latency");
    ApiClient client(server_url, api_key);
    const std::string device_id = "expl-hex20";
    if (!client.put_device(device_id, snapshot_to_json(fixtures::hex20_ideal(device_id))).ok())
        return 1;

    auto cfg = base_agent_config(server_url, api_key, opts, "expl-agent");
    cfg.poll_interval_s = 0.05;
    cfg.backend.plan.capacity = 2;
    cfg.max_slots = 2;
    const pid_t agent = spawn_agent(opts.agent_bin, write_agent_config(opts, cfg));

    const auto snapshot = fixtures::hex20_ideal(device_id);
    const int reps = 16;
    std::map<int, std::vector<double>> admit_by_n, poll_by_n;
    std::map<std::string, std::pair<int, double>> observe_times;  // task -> (n, observed at)
    std::vector<std::string> all_ids;

    bool pass = true;
    for (int n = 4; n <= 10; ++n) {
        for (int rep = 0; rep < reps; ++rep) {
            const auto source = fixtures::random_native_source(snapshot, n, 5,
                                                               9000 + n * 100 + rep);
            const double t0 = monotonic_seconds();
            const auto r = client.submit_task({{"circuit_source", source},
                                               {"dialect", "nqasm-1"},
                                               {"shots", 256},
                                               {"device_id", device_id},
                                               {"seed", 77}});
            const double t_admit = monotonic_seconds() - t0;
            if (r.status != 201) {
                pass = false;
                continue;
            }
            const auto id = r.body.at("task_id").get<std::string>();
            admit_by_n[n].push_back(t_admit);
            all_ids.push_back(id);

            // poll to completion at a fixed cadence; the poll-visible gap is
            // measured against the terminal event timestamp afterwards
            const double deadline = monotonic_seconds() + 30.0;
            while (monotonic_seconds() < deadline) {
                const auto s = client.get_task(id);
                if (s.ok() && s.body.value("state", "") == "COMPLETED") {
                    observe_times[id] = {n, std::chrono::duration<double>(
                                                std::chrono::system_clock::now().time_since_epoch())
                                                .count()};
                    break;
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(5));
            }
            if (!observe_times.count(id)) pass = false;
        }
    }
    kill_agent(agent, SIGTERM);

    // reconstruct T_poll from the authoritative event stream
    const auto events = fetch_events(server_url, api_key);
    std::map<std::string, double> completed_at;
    for (const auto& ev : events) {
        if (ev.value("event_type", "") == "TASK_COMPLETED")
            completed_at[ev.value("task_id", "")] = iso_seconds(ev.value("timestamp", ""));
    }
    for (const auto& [id, np] : observe_times) {
        if (!completed_at.count(id)) continue;
        poll_by_n[np.first].push_back(std::max(0.0, np.second - completed_at[id]));
    }

    // latency noise is one-sided; drop the top quarter and average the rest
    auto trimmed_mean = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const size_t keep = v.size() - v.size() / 4;
        double s = 0;
        for (size_t i = 0; i < keep; ++i) s += v[i];
        return keep ? s / static_cast<double>(keep) : 0.0;
    };

    json per_n = json::array();
    double admit_min = 1e99, admit_max = 0, poll_min = 1e99, poll_max = 0;
    for (int n = 4; n <= 10; ++n) {
        const double a = trimmed_mean(admit_by_n[n]);
        const double p = trimmed_mean(poll_by_n[n]);
        per_n.push_back({{"n", n}, {"t_admit_s", a}, {"t_poll_s", p}});
        admit_min = std::min(admit_min, a);
        admit_max = std::max(admit_max, a);
        poll_min = std::min(poll_min, p);
        poll_max = std::max(poll_max, p);
    }
    const double admit_ratio = admit_min > 0 ? admit_max / admit_min : 1e99;
    const double poll_ratio = poll_min > 0 ? poll_max / poll_min : 1e99;
    if (admit_ratio >= 2.0 || poll_ratio >= 2.0) pass = false;

    // separate in-process scaling sweep: simulate_s should roughly double
    // per added qubit on random dense circuits
    json sweep = json::array();
    std::map<int, double> sim_time;
    for (int n = 14; n <= 18; ++n) {
        const auto source = fixtures::random_native_source(snapshot, n, 10, 4242 + n);
        SimulationRequest req;
        req.circuit = parse(source, kSupportedDialect);
        req.noise = NoiseModel{};
        req.shots = 8;
        req.seed = 5;
        double best = 1e99;
        for (int trial = 0; trial < 3; ++trial) best = std::min(best, run(req).timings.simulate_s);
        sim_time[n] = best;
        sweep.push_back({{"n", n}, {"simulate_s", best}});
    }
    json ratios = json::array();
    for (int n = 15; n <= 18; ++n) {
        const double ratio = sim_time[n] / sim_time[n - 1];
        ratios.push_back(ratio);
        if (ratio < 1.5 || ratio > 3.0) pass = false;
    }

    json report;
    report["per_n"] = per_n;
    report["t_admit_max_over_min"] = admit_ratio;
    report["t_poll_max_over_min"] = poll_ratio;
    report["scaling_sweep"] = sweep;
    report["simulate_ratios"] = ratios;
    return finish_report(opts, "latency", report, pass);
}

// ---- exp recovery ----------------------------------------------------------------

int exp_recovery(const std::string& server_url, const std::string& api_key, ExpOpts opts) {
    resolve_opts(opts, "recovery");
    ApiClient client(server_url, api_key);
    const std::string device_id = "expr-hex20";
    const double window_s = 5.0;
    if (!client.put_device(device_id, snapshot_to_json(fixtures::hex20_ideal(device_id))).ok())
        return 1;

    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i) {
        const auto r = client.submit_task(
            {{"circuit_source", "qubits 2\nsx 0\ncz 0 1\nmeasure 0\nmeasure 1"},
             {"dialect", "nqasm-1"},
             {"shots", 512},
             {"device_id", device_id},
             {"seed", 3000 + i}});
        if (r.status != 201) return 1;
        ids.push_back(r.body.at("task_id").get<std::string>());
    }

    auto cfg = base_agent_config(server_url, api_key, opts, "expr-agent");
    cfg.max_slots = 3;
    cfg.backend.kind = BackendConfig::Kind::Simulated;
    cfg.backend.plan.capacity = 3;
    cfg.backend.plan.queue_delay = {QueueDelay::Kind::Fixed, 8.0, 0, 0};
    const auto config_path = write_agent_config(opts, cfg);
    pid_t agent = spawn_agent(opts.agent_bin, config_path);

    // wait until all three are RUNNING, then kill the agent hard
    if (!wait_all_terminal(client, ids, 20.0, "RUNNING")) {
        kill_agent(agent);
        return 1;
    }
    kill_agent(agent, SIGKILL);

    std::map<std::string, std::string> owners;
    for (const auto& id : ids) owners[id] = client.get_task(id).body.value("owner", "");

    // the control plane must preserve RUNNING with unchanged owner for the
    // whole observation window (2x liveness)
    bool pass = true;
    const double observe_until = monotonic_seconds() + 2 * window_s;
    while (monotonic_seconds() < observe_until) {
        for (const auto& id : ids) {
            const auto r = client.get_task(id);
            if (!r.ok() || r.body.value("state", "") != "RUNNING" ||
                r.body.value("owner", "") != owners[id]) {
                pass = false;
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(500));
    }

    const auto stale = client.stale_tasks(window_s);
    size_t stale_found = 0;
    if (stale.ok()) {
        for (const auto& t : stale.body) {
            if (std::find(ids.begin(), ids.end(), t.value("task_id", "")) != ids.end())
                ++stale_found;
        }
    }
    if (stale_found != ids.size()) pass = false;

    for (const auto& id : ids) {
        if (!client.requeue(id).ok()) pass = false;
    }

    agent = spawn_agent(opts.agent_bin, config_path);
    if (!wait_all_terminal(client, ids, 40.0)) pass = false;
    kill_agent(agent, SIGTERM);

    // exactly one completion event per task
    const auto events = fetch_events(server_url, api_key);
    std::map<std::string, int> completions;
    for (const auto& ev : events) {
        if (ev.value("event_type", "") == "TASK_COMPLETED") ++completions[ev.value("task_id", "")];
    }
    for (const auto& id : ids) {
        if (completions[id] != 1) pass = false;
    }

    json report;
    report["tasks"] = ids;
    report["stale_listed"] = stale_found;
    report["expectation"] = "3 preserved RUNNING, 3 requeued, 3/3 completed, 0 duplicate terminals";
    return finish_report(opts, "recovery", report, pass);
}

// ---- exp concurrency ----------------------------------------------------------------

int exp_concurrency(const std::string& server_url, const std::string& api_key, ExpOpts opts) {
    resolve_opts(opts, "concurrency");
    ApiClient client(server_url, api_key);
    const std::string device_id = "expc-hex20";
    if (!client.put_device(device_id, snapshot_to_json(fixtures::hex20_ideal(device_id))).ok())
        return 1;

    const auto snapshot = fixtures::hex20_ideal(device_id);
    std::vector<std::string> ids;
    for (int i = 0; i < 50; ++i) {
        const auto source = fixtures::random_native_source(snapshot, 5, 5, 6000 + i);
        const auto r = client.submit_task({{"circuit_source", source},
                                           {"dialect", "nqasm-1"},
                                           {"shots", 1024},
                                           {"device_id", device_id},
                                           {"seed", 6000 + i}});
        if (r.status != 201) return 1;
        ids.push_back(r.body.at("task_id").get<std::string>());
    }

    auto make_cfg = [&](const std::string& agent_id) {
        auto cfg = base_agent_config(server_url, api_key, opts, agent_id);
        cfg.max_slots = 2;
        cfg.backend.kind = BackendConfig::Kind::Simulated;
        cfg.backend.plan.capacity = 2;
        cfg.backend.plan.queue_delay = {QueueDelay::Kind::Fixed, 2.5, 0, 0};
        return cfg;
    };
    const double t_start = std::chrono::duration<double>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
    const pid_t agent1 = spawn_agent(opts.agent_bin, write_agent_config(opts, make_cfg("expc-a1")));
    const pid_t agent2 = spawn_agent(opts.agent_bin, write_agent_config(opts, make_cfg("expc-a2")));

    bool pass = wait_all_terminal(client, ids, 240.0);
    kill_agent(agent1, SIGTERM);
    kill_agent(agent2, SIGTERM);

    const auto events = fetch_events(server_url, api_key, 1.5);
    std::map<std::string, int> running_count, completed_count;
    std::map<std::string, double> running_at, completed_at;
    std::map<std::string, std::string> owner_of;
    for (const auto& ev : events) {
        const auto id = ev.value("task_id", "");
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) continue;
        const auto type = ev.value("event_type", "");
        if (type == "TASK_RUNNING") {
            ++running_count[id];
            running_at[id] = iso_seconds(ev.value("timestamp", ""));
            if (ev.contains("payload") && ev.at("payload").is_object())
                owner_of[id] = ev.at("payload").value("owner", "");
        } else if (type == "TASK_COMPLETED") {
            ++completed_count[id];
            completed_at[id] = iso_seconds(ev.value("timestamp", ""));
        }
    }

    std::map<std::string, int> split;
    double wall_end = 0, sum_duration = 0, max_duration = 0;
    for (const auto& id : ids) {
        if (running_count[id] != 1 || completed_count[id] != 1) pass = false;
        if (owner_of.count(id)) ++split[owner_of[id]];
        if (completed_at.count(id) && running_at.count(id)) {
            const double d = completed_at[id] - running_at[id];
            sum_duration += d;
            max_duration = std::max(max_duration, d);
            wall_end = std::max(wall_end, completed_at[id]);
        }
    }
    if (split.size() != 2) pass = false;
    for (const auto& [owner, n] : split) {
        (void)owner;
        if (n < 1) pass = false;
    }
    const double wall = wall_end - t_start;
    const double floor = std::max(sum_duration / 4.0, max_duration);
    if (wall > 1.15 * floor) pass = false;

    json report;
    report["completed"] = ids.size();
    json split_json = json::object();
    for (const auto& [owner, n] : split) split_json[owner] = n;
    report["split"] = split_json;
    report["wall_s"] = wall;
    report["four_slot_floor_s"] = floor;
    report["floor_basis"] = "per-task claim-to-completion event gap";
    return finish_report(opts, "concurrency", report, pass);
}

}  // namespace

void register_experiments(CLI::App& app, std::string& server_url, std::string& api_key,
                          int& exit_code) {
    auto* exp = app.add_subcommand("exp", "run an evaluation scenario against a running server");
    exp->require_subcommand(1);

    static ExpOpts opts_binding, opts_fidelity, opts_latency, opts_recovery, opts_concurrency;

    auto* binding = exp->add_subcommand("binding", "pre-claim device mutation binds fresh state");
    add_common_options(binding, opts_binding);
    binding->callback(
        [&] { exit_code = exp_binding(server_url, api_key, opts_binding); });

    auto* fidelity = exp->add_subcommand("fidelity", "calibration content shifts output");
    add_common_options(fidelity, opts_fidelity);
    fidelity->callback(
        [&] { exit_code = exp_fidelity(server_url, api_key, opts_fidelity); });

    auto* latency = exp->add_subcommand("latency", "bounded service overhead and sim scaling");
    add_common_options(latency, opts_latency);
    latency->callback(
        [&] { exit_code = exp_latency(server_url, api_key, opts_latency); });

    auto* recovery = exp->add_subcommand("recovery", "agent crash, stale listing, requeue");
    add_common_options(recovery, opts_recovery);
    recovery->callback(
        [&] { exit_code = exp_recovery(server_url, api_key, opts_recovery); });

    auto* concurrency = exp->add_subcommand("concurrency", "two agents, 50 tasks, exactly once");
    add_common_options(concurrency, opts_concurrency);
    concurrency->callback(
        [&] { exit_code = exp_concurrency(server_url, api_key, opts_concurrency); });
}
