#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vqpu/device.hpp"

namespace vqpu {

// Authoritative device state plus append-only version history. Snapshot
// versions increase strictly across administrative mutations of a device.
class DeviceStore {
  public:
    // Validates the descriptor, stamps device_id/captured_at and assigns
    // version = previous + 1 (1 for a new device). Returns the new version.
    int64_t put(const std::string& device_id, DeviceSnapshot descriptor);

    std::optional<DeviceSnapshot> get_authoritative(const std::string& device_id) const;
    std::vector<DeviceSnapshot> list_authoritative() const;
    std::vector<DeviceSnapshot> history(const std::string& device_id) const;

    // Not exposed over HTTP; exists so claim-time device disappearance is
    // testable.
    bool remove(const std::string& device_id);

  private:
    mutable std::mutex mu_;
    std::map<std::string, DeviceSnapshot> current_;
    std::map<std::string, std::vector<DeviceSnapshot>> history_;
};

struct CacheStats {
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t invalidations = 0;
};

// TTL-governed read cache over the authoritative store. Mutation paths call
// invalidate() before the mutation call returns to its caller, so a read
// ordered after a committed mutation never serves the stale entry.
class SnapshotCache {
  public:
    SnapshotCache(DeviceStore& store, double ttl_s);

    std::optional<DeviceSnapshot> get(const std::string& device_id);
    std::vector<DeviceSnapshot> list();

    void invalidate(const std::string& device_id);
    CacheStats stats() const;

  private:
    struct Entry {
        DeviceSnapshot snapshot;
        double expires_at;  // monotonic seconds
    };

    DeviceStore& store_;
    double ttl_s_;
    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;
    CacheStats stats_;
};

}  // namespace vqpu
