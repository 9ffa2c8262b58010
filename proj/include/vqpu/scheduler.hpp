#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vqpu {

struct RenderedJob {
    std::string job_name;
    std::filesystem::path run_directory;
    std::vector<std::string> command;  // argv; references only the runner and the run directory
    int slots = 1;
};

enum class ExitClass { Completed, Failed, NeverStarted, Killed };
const char* to_string(ExitClass c);

struct TerminalRecord {
    std::string job_id;
    ExitClass exit_class = ExitClass::Failed;
    std::string exit_detail;
    double submitted_at = 0;             // backend-clock seconds
    std::optional<double> started_at;
    std::optional<double> ended_at;
};

// Clock used for queue-delay and kill scheduling. Tests substitute a manual
// clock to make the full (job_id, start, end, exit_class) sequence
// reproducible.
class Clock {
  public:
    virtual ~Clock() = default;
    virtual double now() const = 0;
};

std::shared_ptr<Clock> system_clock_source();

class ManualClock : public Clock {
  public:
    double now() const override;
    void advance(double seconds);

  private:
    mutable std::mutex mu_;
    double now_ = 0;
};

struct QueueDelay {
    enum class Kind { Fixed, Uniform } kind = Kind::Fixed;
    double fixed_s = 0;
    double lo_s = 0;
    double hi_s = 0;
};

struct FaultInjection {
    enum class Kind { NeverStart, KillAfter, LoseArtifact };
    Kind kind = Kind::NeverStart;
    std::optional<int> ordinal;              // 1-based submission ordinal
    std::optional<std::string> name_substr;  // matches job_name
    double kill_after_s = 0;
};

struct FaultPlan {
    QueueDelay queue_delay;
    int capacity = 2;
    uint64_t seed = 0;
    std::vector<FaultInjection> injections;

    nlohmann::ordered_json to_json() const;
    static FaultPlan from_json(const nlohmann::json& j);
};

// The narrow execution boundary: submit a rendered job, observe the active
// set, recover terminal accounting evidence. Nothing above this interface
// knows how jobs are realised.
class SchedulerBackend {
  public:
    virtual ~SchedulerBackend() = default;

    virtual std::string submit(const RenderedJob& job) = 0;  // throws SUBMIT_REJECTED
    virtual std::set<std::string> observe_active() = 0;
    // nullopt while the job is still active; throws UNKNOWN_JOB.
    virtual std::optional<TerminalRecord> query_terminal(const std::string& job_id) = 0;
    virtual std::vector<TerminalRecord> terminal_records() = 0;
    // Kills every child process immediately (abrupt shutdown path).
    virtual void terminate_all() = 0;
};

std::unique_ptr<SchedulerBackend> make_local_backend(int capacity);
std::unique_ptr<SchedulerBackend> make_simulated_backend(FaultPlan plan,
                                                         std::shared_ptr<Clock> clock = nullptr);

}  // namespace vqpu
