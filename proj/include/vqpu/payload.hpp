#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vqpu/device.hpp"
#include "vqpu/errors.hpp"
#include "vqpu/sim.hpp"

namespace vqpu {

// The hermetic execution contract materialised into a run directory.
// Evaluating it requires no network access; its serialized form is
// byte-stable so replay equality can be checked at the byte level.
struct ExecutionPayload {
    std::string task_id;
    std::string circuit_source;
    std::string dialect;
    uint64_t shots = 0;
    uint64_t seed = 0;
    DeviceSnapshot bound_snapshot;

    nlohmann::ordered_json to_json() const;
    std::string canonical_string() const { return to_json().dump(); }
    static ExecutionPayload from_json(const nlohmann::json& j);  // throws PAYLOAD_MALFORMED
};

// Run-directory file names. payload.json is written before submission;
// result.json / error.json are written by the runner; timings.json carries
// the wall-clock stage timings (kept out of result.json so replay stays
// byte-identical); meta.json records scheduler bookkeeping.
namespace artifacts {
inline constexpr const char* kPayload = "payload.json";
inline constexpr const char* kResult = "result.json";
inline constexpr const char* kError = "error.json";
inline constexpr const char* kTimings = "timings.json";
inline constexpr const char* kMeta = "meta.json";
}  // namespace artifacts

// Deterministic result artifact content (fixed key order, sorted counts).
nlohmann::ordered_json result_artifact_json(const std::string& task_id, int64_t snapshot_version,
                                            const SimulationResult& result);

nlohmann::ordered_json timings_json(const Timings& t);
Timings timings_from_json(const nlohmann::json& j);

std::optional<nlohmann::json> read_json_file(const std::filesystem::path& path);

// Validates a result artifact against its payload: parses JSON, checks the
// task and bound-snapshot identity and that counts sum to shots. Returns the
// parsed artifact or throws Error{ARTIFACT_MALFORMED}.
nlohmann::json validate_result_artifact(const nlohmann::json& artifact,
                                        const std::string& expected_task_id,
                                        uint64_t expected_shots,
                                        int64_t expected_snapshot_version);

}  // namespace vqpu
