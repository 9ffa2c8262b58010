#pragma once

#include "vqpu/sim.hpp"

namespace vqpu {

// Exact output distribution by full Kraus evolution of the density matrix,
// limited to 3 qubits. Independent of the trajectory engine; the sampler
// must converge to this as shots grow.
Distribution density_oracle(const Circuit& circuit, const NoiseModel& noise);

}  // namespace vqpu
