#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace vqpu {

using SystemTime = std::chrono::system_clock::time_point;

// UTC ISO-8601 with microsecond precision ("2026-08-10T12:34:56.123456Z").
// All persisted timestamps use this form; it sorts chronologically as text.
std::string to_iso8601(SystemTime t);
std::string now_iso8601();
std::optional<SystemTime> parse_iso8601(const std::string& s);

std::string random_hex(size_t bytes);
uint64_t random_u64();

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Counter-derived deterministic RNG. One logical stream per (seed, stream)
// pair; used so shot-level parallelism cannot change sampled results.
class Rng {
  public:
    Rng(uint64_t seed, uint64_t stream);

    uint64_t next_u64();
    // Uniform in [0, 1) with 53 bits of entropy.
    double next_double();
    // Uniform in [0, n).
    uint64_t next_below(uint64_t n);

  private:
    uint64_t s_[4];
};

double monotonic_seconds();

}  // namespace vqpu
