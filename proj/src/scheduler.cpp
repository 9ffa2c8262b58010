#include "vqpu/scheduler.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include "vqpu/errors.hpp"
#include "vqpu/payload.hpp"
#include "vqpu/util.hpp"

namespace vqpu {

const char* to_string(ExitClass c) {
    switch (c) {
        case ExitClass::Completed: return "COMPLETED";
        case ExitClass::Failed: return "FAILED";
        case ExitClass::NeverStarted: return "NEVER_STARTED";
        case ExitClass::Killed: return "KILLED";
    }
    return "FAILED";
}

namespace {

class SteadyClock : public Clock {
  public:
    double now() const override { return monotonic_seconds(); }
};

}  // namespace

std::shared_ptr<Clock> system_clock_source() { return std::make_shared<SteadyClock>(); }

double ManualClock::now() const {
    std::lock_guard lock(mu_);
    return now_;
}

void ManualClock::advance(double seconds) {
    std::lock_guard lock(mu_);
    now_ += seconds;
}

nlohmann::ordered_json FaultPlan::to_json() const {
    nlohmann::ordered_json j;
    if (queue_delay.kind == QueueDelay::Kind::Fixed) {
        j["queue_delay"] = {{"type", "fixed"}, {"seconds", queue_delay.fixed_s}};
    } else {
        j["queue_delay"] = {{"type", "uniform"}, {"lo", queue_delay.lo_s}, {"hi", queue_delay.hi_s}};
    }
    j["capacity"] = capacity;
    j["seed"] = seed;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& inj : injections) {
        nlohmann::ordered_json ij;
        switch (inj.kind) {
            case FaultInjection::Kind::NeverStart: ij["fault"] = "NEVER_START"; break;
            case FaultInjection::Kind::KillAfter:
                ij["fault"] = "KILL_AFTER";
                ij["seconds"] = inj.kill_after_s;
                break;
            case FaultInjection::Kind::LoseArtifact: ij["fault"] = "LOSE_ARTIFACT"; break;
        }
        if (inj.ordinal) ij["ordinal"] = *inj.ordinal;
        if (inj.name_substr) ij["name_substr"] = *inj.name_substr;
        arr.push_back(std::move(ij));
    }
    j["injections"] = std::move(arr);
    return j;
}

FaultPlan FaultPlan::from_json(const nlohmann::json& j) {
    FaultPlan plan;
    if (j.contains("queue_delay")) {
        const auto& d = j.at("queue_delay");
        const auto type = d.value("type", "fixed");
        if (type == "uniform") {
            plan.queue_delay.kind = QueueDelay::Kind::Uniform;
            plan.queue_delay.lo_s = d.value("lo", 0.0);
            plan.queue_delay.hi_s = d.value("hi", 0.0);
        } else {
            plan.queue_delay.kind = QueueDelay::Kind::Fixed;
            plan.queue_delay.fixed_s = d.value("seconds", 0.0);
        }
    }
    plan.capacity = j.value("capacity", 2);
    plan.seed = j.value("seed", uint64_t{0});
    if (j.contains("injections")) {
        for (const auto& ij : j.at("injections")) {
            FaultInjection inj;
            const auto fault = ij.value("fault", "");
            if (fault == "NEVER_START") {
                inj.kind = FaultInjection::Kind::NeverStart;
            } else if (fault == "KILL_AFTER") {
                inj.kind = FaultInjection::Kind::KillAfter;
                inj.kill_after_s = ij.value("seconds", 0.0);
            } else if (fault == "LOSE_ARTIFACT") {
                inj.kind = FaultInjection::Kind::LoseArtifact;
            } else {
                throw Error(codes::kSubmitRejected, "unknown fault kind: " + fault);
            }
            if (ij.contains("ordinal")) inj.ordinal = ij.at("ordinal").get<int>();
            if (ij.contains("name_substr")) inj.name_substr = ij.at("name_substr").get<std::string>();
            plan.injections.push_back(std::move(inj));
        }
    }
    return plan;
}

namespace {

struct JobState {
    std::string id;
    RenderedJob job;
    int ordinal = 0;
    double ready_at = 0;
    double submitted_at = 0;
    std::optional<FaultInjection> fault;

    enum class Phase { Pending, Running, Terminal } phase = Phase::Pending;
    pid_t pid = -1;
    double started_at = 0;
    bool kill_issued = false;
    TerminalRecord terminal;
};

// Process-backed batch engine shared by the local and simulated backends:
// sampled queue delay, slot capacity and optional fault injection around a
// spawned runner process.
class BatchEngine : public SchedulerBackend {
  public:
    BatchEngine(FaultPlan plan, std::shared_ptr<Clock> clock, std::string id_prefix)
        : plan_(std::move(plan)),
          clock_(clock ? std::move(clock) : system_clock_source()),
          rng_(plan_.seed, 0),
          id_prefix_(std::move(id_prefix)) {
        if (plan_.capacity <= 0)
            throw Error(codes::kSubmitRejected, "scheduler capacity must be positive");
        driver_ = std::thread([this] { drive(); });
    }

    ~BatchEngine() override {
        stopping_ = true;
        if (driver_.joinable()) driver_.join();
        kill_all_children();
        reap_blocking();
    }

    std::string submit(const RenderedJob& job) override {
        namespace fs = std::filesystem;
        if (!fs::is_directory(job.run_directory))
            throw Error(codes::kSubmitRejected,
                        "run directory does not exist: " + job.run_directory.string());
        if (!fs::exists(job.run_directory / artifacts::kPayload))
            throw Error(codes::kSubmitRejected, "run directory has no payload");
        if (job.command.empty())
            throw Error(codes::kSubmitRejected, "job command is empty");

        std::lock_guard lock(mu_);
        JobState st;
        st.ordinal = ++ordinal_;
        st.id = id_prefix_ + std::to_string(st.ordinal);
        st.job = job;
        st.submitted_at = clock_->now();
        st.ready_at = st.submitted_at + sample_delay();
        st.fault = match_fault(st.ordinal, job.job_name);
        std::string id = st.id;
        jobs_[id] = std::move(st);
        return id;
    }

    std::set<std::string> observe_active() override {
        std::lock_guard lock(mu_);
        std::set<std::string> out;
        for (const auto& [id, st] : jobs_) {
            if (st.phase != JobState::Phase::Terminal) out.insert(id);
        }
        return out;
    }

    std::optional<TerminalRecord> query_terminal(const std::string& job_id) override {
        std::lock_guard lock(mu_);
        const auto it = jobs_.find(job_id);
        if (it == jobs_.end()) throw Error(codes::kUnknownJob, "no such job: " + job_id);
        if (it->second.phase != JobState::Phase::Terminal) return std::nullopt;
        return it->second.terminal;
    }

    std::vector<TerminalRecord> terminal_records() override {
        std::lock_guard lock(mu_);
        std::vector<std::pair<int, TerminalRecord>> recs;
        for (const auto& [id, st] : jobs_) {
            (void)id;
            if (st.phase == JobState::Phase::Terminal) recs.emplace_back(st.ordinal, st.terminal);
        }
        std::sort(recs.begin(), recs.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<TerminalRecord> out;
        out.reserve(recs.size());
        for (auto& [ord, rec] : recs) {
            (void)ord;
            out.push_back(std::move(rec));
        }
        return out;
    }

    void terminate_all() override {
        kill_all_children();
    }

  private:
    double sample_delay() {
        if (plan_.queue_delay.kind == QueueDelay::Kind::Fixed) return plan_.queue_delay.fixed_s;
        return plan_.queue_delay.lo_s +
               rng_.next_double() * (plan_.queue_delay.hi_s - plan_.queue_delay.lo_s);
    }

    std::optional<FaultInjection> match_fault(int ordinal, const std::string& name) const {
        for (const auto& inj : plan_.injections) {
            if (inj.ordinal && *inj.ordinal == ordinal) return inj;
            if (inj.name_substr && name.find(*inj.name_substr) != std::string::npos) return inj;
        }
        return std::nullopt;
    }

    void kill_all_children() {
        std::lock_guard lock(mu_);
        for (auto& [id, st] : jobs_) {
            (void)id;
            if (st.phase == JobState::Phase::Running && st.pid > 0) {
                ::kill(st.pid, SIGKILL);
                st.kill_issued = true;
            }
        }
    }

    void reap_blocking() {
        std::lock_guard lock(mu_);
        for (auto& [id, st] : jobs_) {
            (void)id;
            if (st.phase == JobState::Phase::Running && st.pid > 0) {
                int status = 0;
                ::waitpid(st.pid, &status, 0);
                finish_locked(st, status);
            }
        }
    }

    void spawn_locked(JobState& st) {
        std::vector<char*> argv;
        argv.reserve(st.job.command.size() + 1);
        for (auto& arg : st.job.command) argv.push_back(const_cast<char*>(arg.c_str()));
        argv.push_back(nullptr);

        const auto log_path = (st.job.run_directory / "runner.log").string();
        const pid_t pid = ::fork();
        if (pid < 0) {
            st.phase = JobState::Phase::Terminal;
            st.terminal = make_record(st, ExitClass::Failed, "fork failed");
            return;
        }
        if (pid == 0) {
            const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
            if (fd >= 0) {
                ::dup2(fd, STDOUT_FILENO);
                ::dup2(fd, STDERR_FILENO);
                ::close(fd);
            }
            ::execvp(argv[0], argv.data());
            _exit(127);
        }
        st.pid = pid;
        st.phase = JobState::Phase::Running;
        st.started_at = clock_->now();
    }

    TerminalRecord make_record(const JobState& st, ExitClass cls, std::string detail) const {
        TerminalRecord rec;
        rec.job_id = st.id;
        rec.exit_class = cls;
        rec.exit_detail = std::move(detail);
        rec.submitted_at = st.submitted_at;
        if (st.phase == JobState::Phase::Running || st.pid > 0) rec.started_at = st.started_at;
        rec.ended_at = clock_->now();
        return rec;
    }

    void finish_locked(JobState& st, int status) {
        ExitClass cls;
        std::string detail;
        if (st.kill_issued) {
            cls = ExitClass::Killed;
            detail = "killed";
        } else if (WIFEXITED(status)) {
            const int code = WEXITSTATUS(status);
            cls = code == 0 ? ExitClass::Completed : ExitClass::Failed;
            detail = "exit code " + std::to_string(code);
        } else if (WIFSIGNALED(status)) {
            cls = ExitClass::Killed;
            detail = "signal " + std::to_string(WTERMSIG(status));
        } else {
            cls = ExitClass::Failed;
            detail = "unknown wait status";
        }

        if (cls == ExitClass::Completed && st.fault &&
            st.fault->kind == FaultInjection::Kind::LoseArtifact) {
            std::error_code ec;
            std::filesystem::remove(st.job.run_directory / artifacts::kResult, ec);
        }
        if (st.kill_issued && st.fault && st.fault->kind == FaultInjection::Kind::KillAfter)
            detail = "killed by fault injection after " + std::to_string(st.fault->kill_after_s) + "s";

        st.phase = JobState::Phase::Terminal;
        st.terminal = make_record(st, cls, detail);
        st.pid = -1;
    }

    void drive() {
        while (!stopping_) {
            {
                std::lock_guard lock(mu_);
                const double now = clock_->now();

                // reap finished processes
                for (auto& [id, st] : jobs_) {
                    (void)id;
                    if (st.phase != JobState::Phase::Running) continue;
                    int status = 0;
                    const pid_t r = ::waitpid(st.pid, &status, WNOHANG);
                    if (r == st.pid) finish_locked(st, status);
                }

                // fire kill-after injections
                for (auto& [id, st] : jobs_) {
                    (void)id;
                    if (st.phase != JobState::Phase::Running || st.kill_issued) continue;
                    if (st.fault && st.fault->kind == FaultInjection::Kind::KillAfter &&
                        now >= st.started_at + st.fault->kill_after_s) {
                        ::kill(st.pid, SIGKILL);
                        st.kill_issued = true;
                    }
                }

                // start eligible pending jobs in (ready_at, ordinal) order
                int running = 0;
                for (const auto& [id, st] : jobs_) {
                    (void)id;
                    if (st.phase == JobState::Phase::Running) ++running;
                }
                std::vector<JobState*> pending;
                for (auto& [id, st] : jobs_) {
                    (void)id;
                    if (st.phase == JobState::Phase::Pending && st.ready_at <= now)
                        pending.push_back(&st);
                }
                std::sort(pending.begin(), pending.end(), [](const JobState* a, const JobState* b) {
                    return std::tie(a->ready_at, a->ordinal) < std::tie(b->ready_at, b->ordinal);
                });
                for (JobState* st : pending) {
                    if (st->fault && st->fault->kind == FaultInjection::Kind::NeverStart) {
                        st->phase = JobState::Phase::Terminal;
                        st->terminal = make_record(*st, ExitClass::NeverStarted,
                                                   "fault injection: never started");
                        st->terminal.started_at.reset();
                        continue;
                    }
                    if (running >= plan_.capacity) break;
                    spawn_locked(*st);
                    if (st->phase == JobState::Phase::Running) ++running;
                }
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
    }

    FaultPlan plan_;
    std::shared_ptr<Clock> clock_;
    Rng rng_;
    std::string id_prefix_;

    std::mutex mu_;
    std::map<std::string, JobState> jobs_;
    int ordinal_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread driver_;
};

}  // namespace

std::unique_ptr<SchedulerBackend> make_local_backend(int capacity) {
    FaultPlan plan;
    plan.capacity = capacity;
    plan.queue_delay.kind = QueueDelay::Kind::Fixed;
    plan.queue_delay.fixed_s = 0;
    return std::make_unique<BatchEngine>(std::move(plan), nullptr, "job-");
}

std::unique_ptr<SchedulerBackend> make_simulated_backend(FaultPlan plan,
                                                         std::shared_ptr<Clock> clock) {
    return std::make_unique<BatchEngine>(std::move(plan), std::move(clock), "sim-");
}

}  // namespace vqpu
