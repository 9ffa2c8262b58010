#include "vqpu/util.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <stdexcept>

#include "vqpu/errors.hpp"

namespace vqpu {

std::string to_iso8601(SystemTime t) {
    using namespace std::chrono;
    const auto us = duration_cast<microseconds>(t.time_since_epoch());
    const std::time_t secs = static_cast<std::time_t>(us.count() / 1000000);
    const long frac = static_cast<long>(us.count() % 1000000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06ldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

std::string now_iso8601() { return to_iso8601(std::chrono::system_clock::now()); }

std::optional<SystemTime> parse_iso8601(const std::string& s) {
    std::tm tm{};
    long frac = 0;
    int n = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d.%6ld%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                    &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &frac, &n) != 7) {
        frac = 0;
        if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                        &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &n) != 6) {
            return std::nullopt;
        }
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t secs = timegm(&tm);
    if (secs == static_cast<std::time_t>(-1)) return std::nullopt;
    return SystemTime{std::chrono::seconds(secs) + std::chrono::microseconds(frac)};
}

std::string random_hex(size_t bytes) {
    static thread_local std::mt19937_64 eng{std::random_device{}()};
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes * 2);
    for (size_t i = 0; i < bytes; ++i) {
        const auto b = static_cast<unsigned>(eng() & 0xff);
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

uint64_t random_u64() {
    static thread_local std::mt19937_64 eng{std::random_device{}()};
    return eng();
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp." + random_hex(4));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(codes::kStoreError, "cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(codes::kStoreError, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(codes::kStoreError, "rename failed for " + path.string() + ": " + ec.message());
}

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) {
    uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    for (auto& w : s_) w = splitmix64(x);
}

uint64_t Rng::next_u64() {
    // xoshiro256**
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

uint64_t Rng::next_below(uint64_t n) { return n ? next_u64() % n : 0; }

double monotonic_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

ErrorEnvelope ErrorEnvelope::make(const std::string& code, const std::string& message,
                                  nlohmann::json detail) {
    ErrorEnvelope env;
    env.code = code;
    env.message = message;
    env.detail = std::move(detail);
    env.correlation_id = random_hex(8);
    env.timestamp = now_iso8601();
    return env;
}

nlohmann::ordered_json ErrorEnvelope::to_json() const {
    nlohmann::ordered_json j;
    j["code"] = code;
    j["message"] = message;
    j["detail"] = detail;
    j["correlation_id"] = correlation_id;
    j["timestamp"] = timestamp;
    return j;
}

ErrorEnvelope ErrorEnvelope::from_json(const nlohmann::json& j) {
    ErrorEnvelope env;
    env.code = j.value("code", "");
    env.message = j.value("message", "");
    env.detail = j.contains("detail") ? j.at("detail") : nlohmann::json(nullptr);
    env.correlation_id = j.value("correlation_id", "");
    env.timestamp = j.value("timestamp", "");
    return env;
}

}  // namespace vqpu
