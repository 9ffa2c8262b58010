#include "vqpu/sse_broker.hpp"

#include <algorithm>

namespace vqpu {

SseBroker::Subscriber::Pop SseBroker::Subscriber::pop(double timeout_s, LifecycleEvent& out) {
    std::unique_lock lock(mu);
    cv.wait_for(lock, std::chrono::duration<double>(timeout_s),
                [&] { return closed || !queue.empty(); });
    if (!queue.empty()) {
        out = std::move(queue.front());
        queue.pop_front();
        return Pop::Event;
    }
    return closed ? Pop::Closed : Pop::Timeout;
}

bool SseBroker::Subscriber::overflowed() const {
    std::lock_guard lock(mu);
    return overflow;
}

SseBroker::SseBroker(size_t queue_capacity, size_t replay_window)
    : queue_capacity_(queue_capacity), replay_window_(replay_window) {}

void SseBroker::seed_window(const std::vector<LifecycleEvent>& events) {
    std::lock_guard lock(mu_);
    for (const auto& ev : events) {
        window_.push_back(ev);
        if (window_.size() > replay_window_) window_.pop_front();
    }
}

SseBroker::Subscription SseBroker::subscribe(std::optional<uint64_t> replay_from) {
    std::lock_guard lock(mu_);
    Subscription s;
    s.subscriber = std::make_shared<Subscriber>();
    s.subscriber->capacity = queue_capacity_;
    s.window_start = window_.empty() ? 0 : window_.front().sequence;

    uint64_t last = 0;
    if (replay_from) {
        if (!window_.empty() && *replay_from + 1 < s.window_start) s.window_exceeded = true;
        for (const auto& ev : window_) {
            if (ev.sequence > *replay_from) s.replay.push_back(ev);
        }
        last = s.replay.empty() ? *replay_from : s.replay.back().sequence;
    } else {
        last = window_.empty() ? 0 : window_.back().sequence;
    }
    s.subscriber->last_enqueued = last;
    subscribers_.push_back(s.subscriber);
    return s;
}

void SseBroker::unsubscribe(const SubscriberPtr& sub) {
    std::lock_guard lock(mu_);
    subscribers_.erase(std::remove(subscribers_.begin(), subscribers_.end(), sub),
                       subscribers_.end());
}

void SseBroker::publish(const LifecycleEvent& ev) {
    std::lock_guard lock(mu_);
    window_.push_back(ev);
    if (window_.size() > replay_window_) window_.pop_front();

    for (auto it = subscribers_.begin(); it != subscribers_.end();) {
        Subscriber& sub = **it;
        bool drop = false;
        {
            std::lock_guard sub_lock(sub.mu);
            if (sub.closed) {
                drop = true;
            } else if (ev.sequence <= sub.last_enqueued) {
                // already covered by this subscriber's replay snapshot
            } else if (sub.queue.size() >= sub.capacity) {
                sub.overflow = true;
                sub.closed = true;
                sub.cv.notify_all();
                drop = true;
            } else {
                sub.queue.push_back(ev);
                sub.last_enqueued = ev.sequence;
                sub.cv.notify_all();
            }
        }
        it = drop ? subscribers_.erase(it) : std::next(it);
    }
}

void SseBroker::shutdown() {
    std::lock_guard lock(mu_);
    for (const auto& sub : subscribers_) {
        std::lock_guard sub_lock(sub->mu);
        sub->closed = true;
        sub->cv.notify_all();
    }
    subscribers_.clear();
}

size_t SseBroker::subscriber_count() const {
    std::lock_guard lock(mu_);
    return subscribers_.size();
}

}  // namespace vqpu
