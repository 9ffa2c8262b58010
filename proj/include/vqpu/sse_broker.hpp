#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "vqpu/task.hpp"

namespace vqpu {

// Bounded-memory event fan-out. The broker owns the retained replay window
// and the per-subscriber bounded queues; publication never blocks on any
// subscriber — a subscriber whose queue is full is disconnected instead.
class SseBroker {
  public:
    struct Subscriber {
        enum class Pop { Event, Timeout, Closed };

        // Waits up to timeout_s for the next live event.
        Pop pop(double timeout_s, LifecycleEvent& out);
        bool overflowed() const;

      private:
        friend class SseBroker;
        mutable std::mutex mu;
        std::condition_variable cv;
        std::deque<LifecycleEvent> queue;
        size_t capacity = 0;
        uint64_t last_enqueued = 0;
        bool overflow = false;
        bool closed = false;
    };
    using SubscriberPtr = std::shared_ptr<Subscriber>;

    struct Subscription {
        SubscriberPtr subscriber;
        std::vector<LifecycleEvent> replay;  // retained events after replay_from
        bool window_exceeded = false;        // replay_from older than the window
        uint64_t window_start = 0;
    };

    explicit SseBroker(size_t queue_capacity = 256, size_t replay_window = 10000);

    // Restores the retained window from persisted events at startup.
    void seed_window(const std::vector<LifecycleEvent>& events);

    // Atomic with respect to publish: the returned replay plus subsequent
    // live deliveries form a gap-free, duplicate-free sequence.
    Subscription subscribe(std::optional<uint64_t> replay_from);

    void unsubscribe(const SubscriberPtr& sub);
    void publish(const LifecycleEvent& ev);
    void shutdown();

    size_t subscriber_count() const;

  private:
    mutable std::mutex mu_;
    std::vector<SubscriberPtr> subscribers_;
    std::deque<LifecycleEvent> window_;
    size_t queue_capacity_;
    size_t replay_window_;
};

}  // namespace vqpu
