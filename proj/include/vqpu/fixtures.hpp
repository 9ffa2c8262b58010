#pragma once

#include <cstdint>
#include <string>

#include "vqpu/device.hpp"

namespace vqpu {
namespace fixtures {

// 20-qubit heavy-hex tile with deterministic synthetic calibration
// (eps_1q, readout and directed-edge eps vary per qubit/edge).
DeviceSnapshot hex20_noisy(const std::string& device_id = "hex20-noisy");

// Same topology and native gate set with all calibration fields null.
DeviceSnapshot hex20_ideal(const std::string& device_id = "hex20-ideal");

// Two-qubit workload whose ideal output is exactly |00>: each repetition
// applies sx^4 on both qubits and cz^2 on edge (0,1), so gate and readout
// calibration accumulate while the net unitary stays the identity.
std::string amplified_identity_source(int repetitions);

// Random circuit over qubits 0..n-1 in the native set, cz restricted to the
// given snapshot's directed edges within that range. Layered: one 1q gate
// per qubit then a few available cz's per layer. Ends measuring all qubits.
std::string random_native_source(const DeviceSnapshot& snapshot, int num_qubits, int layers,
                                 uint64_t seed);

}  // namespace fixtures
}  // namespace vqpu
