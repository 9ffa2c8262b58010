#include "vqpu/event_log.hpp"

#include <fstream>

namespace vqpu {

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            const auto ev = LifecycleEvent::from_json(j);
            if (ev.sequence > last_sequence_) last_sequence_ = ev.sequence;
        }
    }
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app);
    if (!out_) throw Error(codes::kStoreError, "cannot open event log " + path_.string());
}

LifecycleEvent EventLog::append(const std::string& event_type, const std::string& task_id,
                                const std::string& device_id, nlohmann::json payload) {
    std::lock_guard lock(mu_);
    LifecycleEvent ev;
    ev.sequence = ++last_sequence_;
    ev.event_type = event_type;
    ev.task_id = task_id;
    ev.device_id = device_id;
    ev.timestamp = now_iso8601();
    ev.payload = std::move(payload);

    out_ << ev.to_json().dump() << "\n";
    out_.flush();
    if (!out_) throw Error(codes::kStoreError, "event log write failed");

    // The sink (the SSE broker) is invoked under the log mutex so that
    // publication order equals sequence order.
    if (sink_) sink_(ev);
    return ev;
}

uint64_t EventLog::last_sequence() const {
    std::lock_guard lock(mu_);
    return last_sequence_;
}

void EventLog::set_sink(Sink sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
}

std::vector<LifecycleEvent> EventLog::read_all() const {
    std::lock_guard lock(mu_);
    std::vector<LifecycleEvent> out;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        out.push_back(LifecycleEvent::from_json(j));
    }
    return out;
}

std::vector<LifecycleEvent> EventLog::tail(size_t n) const {
    auto all = read_all();
    if (all.size() > n) all.erase(all.begin(), all.end() - static_cast<ptrdiff_t>(n));
    return all;
}

}  // namespace vqpu
