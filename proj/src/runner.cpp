#include "vqpu/runner.hpp"

#include "vqpu/circuit.hpp"
#include "vqpu/oracle.hpp"
#include "vqpu/payload.hpp"
#include "vqpu/util.hpp"

namespace vqpu {

namespace {

int fail(const std::filesystem::path& dir, const ErrorEnvelope& env) {
    try {
        atomic_write_file(dir / artifacts::kError, env.to_json().dump() + "\n");
    } catch (...) {
        // nothing else to do: the exit code still reports failure
    }
    return 1;
}

}  // namespace

int execute_run_directory(const std::filesystem::path& dir) {
    try {
        const auto payload_json = read_json_file(dir / artifacts::kPayload);
        if (!payload_json)
            return fail(dir, ErrorEnvelope::make(codes::kPayloadMalformed,
                                                 "payload.json missing or not valid JSON"));
        const auto payload = ExecutionPayload::from_json(*payload_json);

        Timings timings;

        double t0 = monotonic_seconds();
        const Circuit circuit = parse(payload.circuit_source, payload.dialect);
        timings.parse_s = monotonic_seconds() - t0;

        t0 = monotonic_seconds();
        const NoiseModel noise = build_noise_model(payload.bound_snapshot);
        timings.noise_build_s = monotonic_seconds() - t0;

        // Second-stage validation against the bound snapshot. Admission used
        // a possibly different (cached, pre-claim) view; the contract that
        // governs execution is the one in this directory.
        t0 = monotonic_seconds();
        const auto verdict = check_admissibility(circuit, payload.bound_snapshot);
        timings.transpile_s = monotonic_seconds() - t0;
        if (!verdict.ok)
            return fail(dir, ErrorEnvelope::make(verdict.code, verdict.message,
                                                 nlohmann::json{{"line", verdict.line}}));

        SimulationRequest req;
        req.circuit = circuit;
        req.noise = noise;
        req.shots = payload.shots;
        req.seed = payload.seed;
        SimulationResult result = run(req);
        timings.simulate_s = result.timings.simulate_s;
        result.timings = timings;

        // timings.json first: result.json is the completion marker.
        atomic_write_file(dir / artifacts::kTimings, timings_json(timings).dump() + "\n");
        const auto artifact =
            result_artifact_json(payload.task_id, payload.bound_snapshot.snapshot_version, result);
        atomic_write_file(dir / artifacts::kResult, artifact.dump() + "\n");
        return 0;
    } catch (const Error& e) {
        return fail(dir, ErrorEnvelope::from(e));
    } catch (const std::exception& ex) {
        return fail(dir, ErrorEnvelope::make(codes::kInternalSimError, ex.what()));
    }
}

}  // namespace vqpu
