#include "vqpu/payload.hpp"

#include <fstream>
#include <sstream>

namespace vqpu {

nlohmann::ordered_json ExecutionPayload::to_json() const {
    nlohmann::ordered_json j;
    j["task_id"] = task_id;
    j["circuit_source"] = circuit_source;
    j["dialect"] = dialect;
    j["shots"] = shots;
    j["seed"] = seed;
    j["bound_snapshot"] = snapshot_to_json(bound_snapshot);
    return j;
}

ExecutionPayload ExecutionPayload::from_json(const nlohmann::json& j) {
    ExecutionPayload p;
    try {
        p.task_id = j.at("task_id").get<std::string>();
        p.circuit_source = j.at("circuit_source").get<std::string>();
        p.dialect = j.at("dialect").get<std::string>();
        p.shots = j.at("shots").get<uint64_t>();
        p.seed = j.at("seed").get<uint64_t>();
        p.bound_snapshot = snapshot_from_json(j.at("bound_snapshot"));
    } catch (const Error& e) {
        throw Error(codes::kPayloadMalformed, e.message(), e.detail());
    } catch (const nlohmann::json::exception& ex) {
        throw Error(codes::kPayloadMalformed, std::string("malformed payload: ") + ex.what());
    }
    if (p.shots == 0) throw Error(codes::kPayloadMalformed, "shots must be positive");
    return p;
}

nlohmann::ordered_json result_artifact_json(const std::string& task_id, int64_t snapshot_version,
                                            const SimulationResult& result) {
    nlohmann::ordered_json j;
    j["task_id"] = task_id;
    j["snapshot_version"] = snapshot_version;
    j["seed"] = result.seed;
    j["shots"] = result.shots;
    auto counts = nlohmann::ordered_json::object();
    for (const auto& [key, n] : result.counts) counts[key] = n;
    j["counts"] = std::move(counts);
    j["edge_gate_mismatches"] = result.edge_gate_mismatches;
    return j;
}

nlohmann::ordered_json timings_json(const Timings& t) {
    nlohmann::ordered_json j;
    j["parse_s"] = t.parse_s;
    j["noise_build_s"] = t.noise_build_s;
    j["transpile_s"] = t.transpile_s;
    j["simulate_s"] = t.simulate_s;
    return j;
}

Timings timings_from_json(const nlohmann::json& j) {
    Timings t;
    t.parse_s = j.value("parse_s", 0.0);
    t.noise_build_s = j.value("noise_build_s", 0.0);
    t.transpile_s = j.value("transpile_s", 0.0);
    t.simulate_s = j.value("simulate_s", 0.0);
    return t;
}

std::optional<nlohmann::json> read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    auto parsed = nlohmann::json::parse(buf.str(), nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    return std::optional<nlohmann::json>(std::move(parsed));
}

nlohmann::json validate_result_artifact(const nlohmann::json& artifact,
                                        const std::string& expected_task_id,
                                        uint64_t expected_shots,
                                        int64_t expected_snapshot_version) {
    if (!artifact.is_object())
        throw Error(codes::kArtifactMalformed, "result artifact is not a JSON object");
    if (artifact.value("task_id", "") != expected_task_id)
        throw Error(codes::kArtifactMalformed, "result artifact task_id mismatch");
    if (artifact.value("snapshot_version", int64_t{-1}) != expected_snapshot_version)
        throw Error(codes::kArtifactMalformed, "result artifact snapshot_version mismatch");
    if (!artifact.contains("counts") || !artifact.at("counts").is_object())
        throw Error(codes::kArtifactMalformed, "result artifact missing counts");
    uint64_t total = 0;
    for (const auto& [key, n] : artifact.at("counts").items()) {
        (void)key;
        if (!n.is_number_integer() || (!n.is_number_unsigned() && n.get<int64_t>() < 0)) {
            throw Error(codes::kArtifactMalformed, "non-integer count");
        }
        total += n.get<uint64_t>();
    }
    if (total != expected_shots)
        throw Error(codes::kArtifactMalformed, "counts do not sum to requested shots");
    return artifact;
}

}  // namespace vqpu
