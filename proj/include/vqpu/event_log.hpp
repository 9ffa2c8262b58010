#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <vector>

#include "vqpu/task.hpp"

namespace vqpu {

// Durable append-only JSONL event log. Assigns global sequences; an optional
// sink (the SSE broker) is invoked synchronously per appended event, in
// sequence order. This log is the replay source for event streaming.
class EventLog {
  public:
    using Sink = std::function<void(const LifecycleEvent&)>;

    explicit EventLog(std::filesystem::path path);

    LifecycleEvent append(const std::string& event_type, const std::string& task_id,
                          const std::string& device_id, nlohmann::json payload);

    uint64_t last_sequence() const;
    void set_sink(Sink sink);

    // Full scan of the persisted log (tests and replay checks).
    std::vector<LifecycleEvent> read_all() const;
    std::vector<LifecycleEvent> tail(size_t n) const;

  private:
    mutable std::mutex mu_;
    std::filesystem::path path_;
    std::ofstream out_;
    uint64_t last_sequence_ = 0;
    Sink sink_;
};

}  // namespace vqpu
