#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vqpu/circuit.hpp"
#include "vqpu/device.hpp"

namespace vqpu {

inline constexpr int kDefaultMaxSimQubits = 22;

struct SimulationRequest {
    Circuit circuit;
    NoiseModel noise;
    uint64_t shots = 1;
    uint64_t seed = 0;
    int max_qubits = kDefaultMaxSimQubits;
};

struct Timings {
    double parse_s = 0.0;
    double noise_build_s = 0.0;
    double transpile_s = 0.0;
    double simulate_s = 0.0;
};

struct SimulationResult {
    std::map<std::string, uint64_t> counts;  // bitstring -> occurrences, sums to shots
    uint64_t shots = 0;
    Timings timings;                         // run() fills simulate_s; the runner fills the rest
    uint64_t seed = 0;
    // Two-qubit gates whose symbol differed from the declared gate of a
    // calibrated edge on the same pair: those get no edge noise, and the
    // mismatch is surfaced here.
    uint64_t edge_gate_mismatches = 0;
};

// Monte-Carlo Pauli-trajectory statevector simulation. One counter-derived
// RNG substream per shot, so results are a pure function of the request.
// Throws Error{QUBIT_LIMIT_EXCEEDED} or Error{INTERNAL_SIM_ERROR}.
SimulationResult run(const SimulationRequest& req);

using Distribution = std::map<std::string, double>;

Distribution counts_to_distribution(const std::map<std::string, uint64_t>& counts);

// ½ Σ|p_k − q_k| over the union of supports. Both inputs must sum to 1
// within 1e-9, else Error{NOT_NORMALIZED}.
double total_variation_distance(const Distribution& p, const Distribution& q);

}  // namespace vqpu
