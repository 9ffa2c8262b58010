#include "vqpu/device.hpp"

#include <algorithm>
#include <unordered_set>

#include "vqpu/errors.hpp"

namespace vqpu {

namespace {

void require(bool cond, const std::string& why) {
    if (!cond) throw Error(codes::kSnapshotInvalid, why);
}

void check_unit_interval(const std::optional<double>& v, const std::string& field) {
    if (v) require(*v >= 0.0 && *v <= 1.0, field + " outside [0,1]");
}

void check_nonnegative(const std::optional<double>& v, const std::string& field) {
    if (v) require(*v >= 0.0, field + " negative");
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

uint64_t pair_key(int src, int dst) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(src)) << 32) |
           static_cast<uint32_t>(dst);
}

}  // namespace

void validate_snapshot(const DeviceSnapshot& s) {
    require(!s.device_id.empty(), "device_id empty");
    require(s.num_qubits > 0, "num_qubits must be positive");
    require(static_cast<int>(s.qubits.size()) == s.num_qubits,
            "qubit calibration list must cover the full register");
    for (int i = 0; i < s.num_qubits; ++i) {
        const auto& q = s.qubits[i];
        require(q.index == i, "qubit calibrations must be indexed 0..n-1 in order");
        check_nonnegative(q.t1_us, "t1_us");
        check_nonnegative(q.t2_us, "t2_us");
        check_unit_interval(q.eps_1q, "eps_1q");
        check_unit_interval(q.readout_error, "readout_error");
    }
    std::unordered_set<uint64_t> seen;
    for (const auto& e : s.edges) {
        require(e.src >= 0 && e.src < s.num_qubits && e.dst >= 0 && e.dst < s.num_qubits,
                "edge endpoint out of range");
        require(e.src != e.dst, "self-loop edge");
        require(seen.insert(pair_key(e.src, e.dst)).second, "duplicate directed edge");
        require(s.native_gates.count(e.gate) != 0, "edge gate not in native_gates");
        check_unit_interval(e.eps, "edge eps");
    }
}

nlohmann::ordered_json snapshot_to_json(const DeviceSnapshot& s) {
    nlohmann::ordered_json j;
    j["device_id"] = s.device_id;
    j["captured_at"] = s.captured_at;
    j["snapshot_version"] = s.snapshot_version;
    j["num_qubits"] = s.num_qubits;
    j["native_gates"] = s.native_gates;  // std::set iterates sorted

    auto qubits = nlohmann::ordered_json::array();
    for (const auto& q : s.qubits) {
        nlohmann::ordered_json qj;
        qj["index"] = q.index;
        qj["state"] = q.state == QubitState::Online ? "ONLINE" : "OFFLINE";
        qj["t1_us"] = opt_json(q.t1_us);
        qj["t2_us"] = opt_json(q.t2_us);
        qj["eps_1q"] = opt_json(q.eps_1q);
        qj["readout_error"] = opt_json(q.readout_error);
        qubits.push_back(std::move(qj));
    }
    j["qubits"] = std::move(qubits);

    auto edges = s.edges;
    std::sort(edges.begin(), edges.end(), [](const EdgeCalibration& a, const EdgeCalibration& b) {
        return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
    });
    auto edges_json = nlohmann::ordered_json::array();
    for (const auto& e : edges) {
        nlohmann::ordered_json ej;
        ej["src"] = e.src;
        ej["dst"] = e.dst;
        ej["gate"] = e.gate;
        ej["eps"] = opt_json(e.eps);
        edges_json.push_back(std::move(ej));
    }
    j["edges"] = std::move(edges_json);
    return j;
}

std::string canonical_snapshot_string(const DeviceSnapshot& s) {
    return snapshot_to_json(s).dump();
}

DeviceSnapshot snapshot_from_json(const nlohmann::json& j) {
    DeviceSnapshot s;
    try {
        s.device_id = j.at("device_id").get<std::string>();
        s.captured_at = j.value("captured_at", "");
        s.snapshot_version = j.value("snapshot_version", int64_t{0});
        s.num_qubits = j.at("num_qubits").get<int>();
        for (const auto& g : j.at("native_gates")) s.native_gates.insert(g.get<std::string>());
        for (const auto& qj : j.at("qubits")) {
            QubitCalibration q;
            q.index = qj.at("index").get<int>();
            const auto state = qj.value("state", "ONLINE");
            if (state == "ONLINE") {
                q.state = QubitState::Online;
            } else if (state == "OFFLINE") {
                q.state = QubitState::Offline;
            } else {
                throw Error(codes::kSnapshotInvalid, "unknown qubit state: " + state);
            }
            q.t1_us = opt_from(qj, "t1_us");
            q.t2_us = opt_from(qj, "t2_us");
            q.eps_1q = opt_from(qj, "eps_1q");
            q.readout_error = opt_from(qj, "readout_error");
            s.qubits.push_back(std::move(q));
        }
        for (const auto& ej : j.at("edges")) {
            EdgeCalibration e;
            e.src = ej.at("src").get<int>();
            e.dst = ej.at("dst").get<int>();
            e.gate = ej.at("gate").get<std::string>();
            e.eps = opt_from(ej, "eps");
            s.edges.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error(codes::kSnapshotInvalid, std::string("malformed snapshot JSON: ") + ex.what());
    }
    validate_snapshot(s);
    return s;
}

AdmissibilityVerdict check_admissibility(const Circuit& c, const DeviceSnapshot& snapshot) {
    std::unordered_set<uint64_t> edge_index;
    edge_index.reserve(snapshot.edges.size() * 2);
    for (const auto& e : snapshot.edges) edge_index.insert(pair_key(e.src, e.dst));

    auto reject = [](const char* code, std::string msg, int line) {
        AdmissibilityVerdict v;
        v.ok = false;
        v.code = code;
        v.message = std::move(msg);
        v.line = line;
        return v;
    };

    for (const auto& instr : c.instructions) {
        if (instr.kind == InstrKind::Gate && snapshot.native_gates.count(instr.gate) == 0)
            return reject(codes::kUnsupportedGate, "gate '" + instr.gate + "' not in native set",
                          instr.line);
        for (int q : instr.operands) {
            if (q < 0 || q >= snapshot.num_qubits)
                return reject(codes::kQubitOutOfRange,
                              "qubit " + std::to_string(q) + " outside device register",
                              instr.line);
            if (snapshot.qubits[q].state != QubitState::Online)
                return reject(codes::kQubitOffline, "qubit " + std::to_string(q) + " is offline",
                              instr.line);
        }
        if (instr.kind == InstrKind::Gate && instr.operands.size() == 2) {
            if (edge_index.count(pair_key(instr.operands[0], instr.operands[1])) == 0)
                return reject(codes::kTopologyViolation,
                              "no directed coupling (" + std::to_string(instr.operands[0]) + "," +
                                  std::to_string(instr.operands[1]) + ")",
                              instr.line);
        }
    }
    return {};
}

NoiseModel build_noise_model(const DeviceSnapshot& snapshot) {
    NoiseModel m;
    for (const auto& q : snapshot.qubits) {
        if (q.eps_1q && *q.eps_1q > 0.0) m.one_qubit_depol[q.index] = *q.eps_1q;
        if (q.readout_error && *q.readout_error > 0.0)
            m.readout_flip[q.index] = std::min(*q.readout_error, 0.5);
    }
    for (const auto& e : snapshot.edges) {
        if (e.eps && *e.eps > 0.0) m.two_qubit_depol[{e.src, e.dst, e.gate}] = *e.eps;
    }
    return m;
}

nlohmann::ordered_json noise_model_to_json(const NoiseModel& m) {
    nlohmann::ordered_json j;
    auto one_q = nlohmann::ordered_json::object();
    for (const auto& [q, p] : m.one_qubit_depol) one_q[std::to_string(q)] = p;
    j["one_qubit_depol"] = std::move(one_q);
    auto readout = nlohmann::ordered_json::object();
    for (const auto& [q, r] : m.readout_flip) readout[std::to_string(q)] = r;
    j["readout_flip"] = std::move(readout);
    auto two_q = nlohmann::ordered_json::array();
    for (const auto& [key, p] : m.two_qubit_depol) {
        two_q.push_back({{"src", std::get<0>(key)},
                         {"dst", std::get<1>(key)},
                         {"gate", std::get<2>(key)},
                         {"p", p}});
    }
    j["two_qubit_depol"] = std::move(two_q);
    return j;
}

SnapshotDelta snapshot_diff(const DeviceSnapshot& a, const DeviceSnapshot& b) {
    if (a.device_id != b.device_id)
        throw Error(codes::kDeviceMismatch,
                    "cannot diff snapshots of different devices: " + a.device_id + " vs " +
                        b.device_id);

    SnapshotDelta d;
    d.num_qubits_changed = a.num_qubits != b.num_qubits;
    d.native_gates_changed = a.native_gates != b.native_gates;

    auto same_qubit = [](const QubitCalibration& x, const QubitCalibration& y) {
        return x.state == y.state && x.t1_us == y.t1_us && x.t2_us == y.t2_us &&
               x.eps_1q == y.eps_1q && x.readout_error == y.readout_error;
    };
    const int max_q = std::max(a.num_qubits, b.num_qubits);
    for (int q = 0; q < max_q; ++q) {
        const bool in_a = q < a.num_qubits;
        const bool in_b = q < b.num_qubits;
        if (!in_a || !in_b || !same_qubit(a.qubits[q], b.qubits[q])) d.changed_qubits.push_back(q);
    }

    std::map<std::pair<int, int>, const EdgeCalibration*> ea, eb;
    for (const auto& e : a.edges) ea[{e.src, e.dst}] = &e;
    for (const auto& e : b.edges) eb[{e.src, e.dst}] = &e;
    for (const auto& [key, edge] : ea) {
        auto it = eb.find(key);
        if (it == eb.end() || it->second->gate != edge->gate || it->second->eps != edge->eps)
            d.changed_edges.push_back(key);
    }
    for (const auto& [key, edge] : eb) {
        (void)edge;
        if (ea.find(key) == ea.end()) d.changed_edges.push_back(key);
    }
    std::sort(d.changed_edges.begin(), d.changed_edges.end());
    return d;
}

}  // namespace vqpu
