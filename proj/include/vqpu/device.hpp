#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqpu/circuit.hpp"

namespace vqpu {

enum class QubitState { Online, Offline };

struct QubitCalibration {
    int index = 0;
    QubitState state = QubitState::Online;
    std::optional<double> t1_us;          // stored, not consumed by the noise model
    std::optional<double> t2_us;          // stored, not consumed by the noise model
    std::optional<double> eps_1q;         // single-qubit gate error, [0,1]
    std::optional<double> readout_error;  // assignment error, [0,1]
};

struct EdgeCalibration {
    int src = 0;
    int dst = 0;
    std::string gate;            // native two-qubit operation on this directed edge
    std::optional<double> eps;   // two-qubit gate error, [0,1]
};

// Time-indexed virtual-device contract: topology, native gates and
// calibration. Directionality is always explicit — an undirected coupling is
// stored as two directed edge records. The canonical JSON form of a snapshot
// is the unit of claim-time binding and of run-directory persistence.
struct DeviceSnapshot {
    std::string device_id;
    std::string captured_at;     // ISO-8601 UTC
    int64_t snapshot_version = 0;
    int num_qubits = 0;
    std::set<std::string> native_gates;
    std::vector<QubitCalibration> qubits;  // indexed 0..num_qubits-1
    std::vector<EdgeCalibration> edges;
};

// Throws Error{SNAPSHOT_INVALID} for out-of-bounds calibration values,
// bad edges (self-loop, duplicate direction, unknown endpoint, non-native
// gate) or a qubit list that does not cover 0..num_qubits-1 exactly.
void validate_snapshot(const DeviceSnapshot& s);

// Fixed key order, sorted native gates, qubits by index, edges by (src,dst);
// absent calibration encoded as null. Byte-stable for identical snapshots.
nlohmann::ordered_json snapshot_to_json(const DeviceSnapshot& s);
std::string canonical_snapshot_string(const DeviceSnapshot& s);
DeviceSnapshot snapshot_from_json(const nlohmann::json& j);

struct AdmissibilityVerdict {
    bool ok = true;
    std::string code;      // one of the four admissibility codes when !ok
    std::string message;
    int line = 0;          // first offending instruction's source line
};

// Syntactic, linear-time check against one snapshot: native gates only,
// online qubits only, two-qubit pairs on available directed edges. Reports
// the first violation in instruction order.
AdmissibilityVerdict check_admissibility(const Circuit& c, const DeviceSnapshot& snapshot);

// Derived noise channels: entries exist only for strictly positive
// calibration values; readout flip rates are clamped to 0.5.
struct NoiseModel {
    std::map<int, double> one_qubit_depol;                        // per qubit, applied to physical 1q gates
    std::map<int, double> readout_flip;                           // per qubit, <= 0.5
    std::map<std::tuple<int, int, std::string>, double> two_qubit_depol;  // per (src,dst,gate)

    bool empty() const {
        return one_qubit_depol.empty() && readout_flip.empty() && two_qubit_depol.empty();
    }
};

NoiseModel build_noise_model(const DeviceSnapshot& snapshot);

// Canonical form used by tests to compare derived models byte-for-byte.
nlohmann::ordered_json noise_model_to_json(const NoiseModel& m);

struct SnapshotDelta {
    std::vector<int> changed_qubits;
    std::vector<std::pair<int, int>> changed_edges;
    bool native_gates_changed = false;
    bool num_qubits_changed = false;

    bool empty() const {
        return changed_qubits.empty() && changed_edges.empty() && !native_gates_changed &&
               !num_qubits_changed;
    }
};

// Structural delta ignoring snapshot_version and captured_at. Throws
// Error{DEVICE_MISMATCH} when the device ids differ.
SnapshotDelta snapshot_diff(const DeviceSnapshot& a, const DeviceSnapshot& b);

}  // namespace vqpu
