#include "vqpu/device_store.hpp"

#include "vqpu/errors.hpp"
#include "vqpu/util.hpp"

namespace vqpu {

int64_t DeviceStore::put(const std::string& device_id, DeviceSnapshot descriptor) {
    descriptor.device_id = device_id;
    descriptor.captured_at = now_iso8601();
    std::lock_guard lock(mu_);
    const auto it = current_.find(device_id);
    descriptor.snapshot_version = (it == current_.end()) ? 1 : it->second.snapshot_version + 1;
    validate_snapshot(descriptor);
    if (it != current_.end()) history_[device_id].push_back(it->second);
    current_[device_id] = std::move(descriptor);
    return current_[device_id].snapshot_version;
}

std::optional<DeviceSnapshot> DeviceStore::get_authoritative(const std::string& device_id) const {
    std::lock_guard lock(mu_);
    const auto it = current_.find(device_id);
    if (it == current_.end()) return std::nullopt;
    return it->second;
}

std::vector<DeviceSnapshot> DeviceStore::list_authoritative() const {
    std::lock_guard lock(mu_);
    std::vector<DeviceSnapshot> out;
    out.reserve(current_.size());
    for (const auto& [id, snap] : current_) {
        (void)id;
        out.push_back(snap);
    }
    return out;
}

std::vector<DeviceSnapshot> DeviceStore::history(const std::string& device_id) const {
    std::lock_guard lock(mu_);
    const auto it = history_.find(device_id);
    if (it == history_.end()) return {};
    return it->second;
}

bool DeviceStore::remove(const std::string& device_id) {
    std::lock_guard lock(mu_);
    return current_.erase(device_id) > 0;
}

SnapshotCache::SnapshotCache(DeviceStore& store, double ttl_s) : store_(store), ttl_s_(ttl_s) {}

std::optional<DeviceSnapshot> SnapshotCache::get(const std::string& device_id) {
    std::lock_guard lock(mu_);
    const double now = monotonic_seconds();
    const auto it = entries_.find(device_id);
    if (it != entries_.end() && now < it->second.expires_at) {
        ++stats_.hits;
        return it->second.snapshot;
    }
    ++stats_.misses;
    auto snap = store_.get_authoritative(device_id);
    if (!snap) {
        entries_.erase(device_id);
        return std::nullopt;
    }
    entries_[device_id] = Entry{*snap, now + ttl_s_};
    return snap;
}

std::vector<DeviceSnapshot> SnapshotCache::list() {
    std::vector<DeviceSnapshot> out;
    for (const auto& snap : store_.list_authoritative()) {
        if (auto cached = get(snap.device_id)) out.push_back(*cached);
    }
    return out;
}

void SnapshotCache::invalidate(const std::string& device_id) {
    std::lock_guard lock(mu_);
    entries_.erase(device_id);
    ++stats_.invalidations;
}

CacheStats SnapshotCache::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

}  // namespace vqpu
