#include "vqpu/fixtures.hpp"

#include <sstream>
#include <vector>

#include "vqpu/util.hpp"

namespace vqpu {
namespace fixtures {

namespace {

// Heavy-hex tile: rows of degree-3 vertices joined through degree-2 bridge
// qubits, stored as undirected pairs and expanded to both directions.
const std::vector<std::pair<int, int>> kHex20Pairs = {
    {0, 1},   {1, 2},   {1, 4},   {2, 3},   {3, 5},   {4, 7},   {5, 8},
    {6, 7},   {7, 10},  {8, 9},   {8, 11},  {10, 12}, {11, 14}, {12, 13},
    {12, 15}, {13, 14}, {14, 16}, {15, 18}, {16, 19}, {17, 18}, {18, 19},
};

DeviceSnapshot hex20_base(const std::string& device_id) {
    DeviceSnapshot s;
    s.device_id = device_id;
    s.captured_at = now_iso8601();
    s.snapshot_version = 0;
    s.num_qubits = 20;
    s.native_gates = {"cz", "sx", "rz", "id", "delay"};
    for (int q = 0; q < s.num_qubits; ++q) {
        QubitCalibration c;
        c.index = q;
        s.qubits.push_back(c);
    }
    for (const auto& [a, b] : kHex20Pairs) {
        s.edges.push_back({a, b, "cz", std::nullopt});
        s.edges.push_back({b, a, "cz", std::nullopt});
    }
    return s;
}

}  // namespace

DeviceSnapshot hex20_noisy(const std::string& device_id) {
    DeviceSnapshot s = hex20_base(device_id);
    for (auto& q : s.qubits) {
        q.t1_us = 120.0 + 8.0 * (q.index % 7);
        q.t2_us = 80.0 + 6.0 * (q.index % 5);
        q.eps_1q = 0.0002 * (1 + q.index % 5);
        q.readout_error = 0.010 + 0.001 * (q.index % 10);
    }
    for (auto& e : s.edges) {
        // asymmetric by direction
        e.eps = 0.005 + 0.0005 * ((e.src + e.dst) % 10) + (e.src > e.dst ? 0.0003 : 0.0);
    }
    return s;
}

DeviceSnapshot hex20_ideal(const std::string& device_id) { return hex20_base(device_id); }

std::string amplified_identity_source(int repetitions) {
    std::ostringstream out;
    out << "qubits 2\n";
    for (int r = 0; r < repetitions; ++r) {
        for (int q = 0; q < 2; ++q) {
            for (int k = 0; k < 4; ++k) out << "sx " << q << "\n";
        }
        out << "cz 0 1\n";
        out << "cz 0 1\n";
    }
    out << "measure 0\nmeasure 1\n";
    return out.str();
}

std::string random_native_source(const DeviceSnapshot& snapshot, int num_qubits, int layers,
                                 uint64_t seed) {
    std::vector<std::pair<int, int>> local_edges;
    for (const auto& e : snapshot.edges) {
        if (e.src < num_qubits && e.dst < num_qubits) local_edges.emplace_back(e.src, e.dst);
    }

    Rng rng(seed, 0);
    std::ostringstream out;
    out << "qubits " << num_qubits << "\n";
    for (int layer = 0; layer < layers; ++layer) {
        for (int q = 0; q < num_qubits; ++q) {
            if (rng.next_below(2) == 0) {
                out << "sx " << q << "\n";
            } else {
                out << "rz " << q << " " << (rng.next_double() * 6.283185307179586) << "\n";
            }
        }
        if (!local_edges.empty()) {
            const int cz_count = 1 + static_cast<int>(rng.next_below(std::max(1, num_qubits / 2)));
            for (int k = 0; k < cz_count; ++k) {
                const auto& e = local_edges[rng.next_below(local_edges.size())];
                out << "cz " << e.first << " " << e.second << "\n";
            }
        }
    }
    for (int q = 0; q < num_qubits; ++q) out << "measure " << q << "\n";
    return out.str();
}

}  // namespace fixtures
}  // namespace vqpu
