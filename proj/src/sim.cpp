#include "vqpu/sim.hpp"

#include <cassert>
#include <cmath>
#include <complex>
#include <numeric>

#include <Eigen/Dense>

#include "vqpu/errors.hpp"
#include "vqpu/util.hpp"

namespace vqpu {

namespace {

using cdouble = std::complex<double>;
using State = Eigen::VectorXcd;

constexpr cdouble kI{0.0, 1.0};

struct Gate1q {
    cdouble m00, m01, m10, m11;
};

// sqrt(X): ½[[1+i, 1−i], [1−i, 1+i]]
const Gate1q kSx{0.5 * (1.0 + kI), 0.5 * (1.0 - kI), 0.5 * (1.0 - kI), 0.5 * (1.0 + kI)};
const Gate1q kPauliX{0, 1, 1, 0};
const Gate1q kPauliY{0, -kI, kI, 0};
const Gate1q kPauliZ{1, 0, 0, -1};

void apply_1q(State& psi, const Gate1q& g, int q) {
    const int64_t mask = int64_t{1} << q;
    const int64_t dim = psi.size();
    for (int64_t base = 0; base < dim; ++base) {
        if (base & mask) continue;
        const int64_t hi = base | mask;
        const cdouble a0 = psi[base];
        const cdouble a1 = psi[hi];
        psi[base] = g.m00 * a0 + g.m01 * a1;
        psi[hi] = g.m10 * a0 + g.m11 * a1;
    }
}

void apply_rz(State& psi, double theta, int q) {
    // diag(1, e^{iθ}) up to global phase
    const cdouble phase = std::exp(kI * theta);
    const int64_t mask = int64_t{1} << q;
    for (int64_t i = 0; i < psi.size(); ++i) {
        if (i & mask) psi[i] *= phase;
    }
}

void apply_cz(State& psi, int a, int b) {
    const int64_t mask = (int64_t{1} << a) | (int64_t{1} << b);
    for (int64_t i = 0; i < psi.size(); ++i) {
        if ((i & mask) == mask) psi[i] = -psi[i];
    }
}

void apply_pauli(State& psi, int which, int q) {
    switch (which) {
        case 0: break;  // I
        case 1: apply_1q(psi, kPauliX, q); break;
        case 2: apply_1q(psi, kPauliY, q); break;
        case 3: apply_1q(psi, kPauliZ, q); break;
    }
}

// Collapses qubit q to |0> or |1> by Born probability, then maps it to |0>.
void projective_reset(State& psi, int q, Rng& rng) {
    const int64_t mask = int64_t{1} << q;
    double p0 = 0.0;
    for (int64_t i = 0; i < psi.size(); ++i) {
        if (!(i & mask)) p0 += std::norm(psi[i]);
    }
    const bool outcome_one = rng.next_double() >= p0;
    const double norm = outcome_one ? std::sqrt(1.0 - p0) : std::sqrt(p0);
    if (norm <= 0.0) throw Error(codes::kInternalSimError, "degenerate reset projection");
    for (int64_t i = 0; i < psi.size(); ++i) {
        const bool bit = (i & mask) != 0;
        if (bit == outcome_one) {
            psi[i] /= norm;
        } else {
            psi[i] = 0.0;
        }
    }
    if (outcome_one) apply_1q(psi, kPauliX, q);
}

[[maybe_unused]] bool norm_is_unit(const State& psi) {
    return std::abs(psi.squaredNorm() - 1.0) < 1e-9;
}

int64_t sample_basis_state(const State& psi, Rng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    const int64_t dim = psi.size();
    for (int64_t i = 0; i < dim; ++i) {
        acc += std::norm(psi[i]);
        if (u < acc) return i;
    }
    return dim - 1;  // u landed in float round-off past the last bin
}

}  // namespace

SimulationResult run(const SimulationRequest& req) {
    const Circuit& c = req.circuit;
    if (c.num_qubits > req.max_qubits)
        throw Error(codes::kQubitLimitExceeded,
                    "circuit has " + std::to_string(c.num_qubits) + " qubits, limit is " +
                        std::to_string(req.max_qubits));
    if (req.shots < 1) throw Error(codes::kInternalSimError, "shots must be >= 1");

    // Per-pair index of declared edge gates, used only to spot symbol
    // mismatches (a mismatched pair gets no two-qubit noise).
    std::map<std::pair<int, int>, std::set<std::string>> edge_gates;
    for (const auto& [key, p] : req.noise.two_qubit_depol) {
        (void)p;
        edge_gates[{std::get<0>(key), std::get<1>(key)}].insert(std::get<2>(key));
    }

    const auto measured = measured_qubits_msb_first(c);
    const int64_t dim = int64_t{1} << c.num_qubits;

    SimulationResult result;
    result.shots = req.shots;
    result.seed = req.seed;

    const double t0 = monotonic_seconds();
    try {
        State psi(dim);
        for (uint64_t shot = 0; shot < req.shots; ++shot) {
            Rng rng(req.seed, shot);
            psi.setZero();
            psi[0] = 1.0;

            for (const auto& instr : c.instructions) {
                switch (instr.kind) {
                    case InstrKind::Barrier:
                    case InstrKind::Measure:
                        break;
                    case InstrKind::Reset:
                        projective_reset(psi, instr.operands[0], rng);
                        break;
                    case InstrKind::Gate: {
                        if (instr.gate == "rz") {
                            apply_rz(psi, instr.parameter.value_or(0.0), instr.operands[0]);
                        } else if (instr.gate == "sx") {
                            apply_1q(psi, kSx, instr.operands[0]);
                            const auto it = req.noise.one_qubit_depol.find(instr.operands[0]);
                            if (it != req.noise.one_qubit_depol.end() &&
                                rng.next_double() < it->second) {
                                apply_pauli(psi, 1 + static_cast<int>(rng.next_below(3)),
                                            instr.operands[0]);
                            }
                        } else if (instr.gate == "id" || instr.gate == "delay") {
                            // virtual frame/timing directives: no unitary, no noise
                        } else if (instr.gate == "cz") {
                            const int a = instr.operands[0];
                            const int b = instr.operands[1];
                            apply_cz(psi, a, b);
                            const auto it = req.noise.two_qubit_depol.find({a, b, instr.gate});
                            if (it != req.noise.two_qubit_depol.end()) {
                                if (rng.next_double() < it->second) {
                                    const int k = 1 + static_cast<int>(rng.next_below(15));
                                    apply_pauli(psi, k / 4, a);
                                    apply_pauli(psi, k % 4, b);
                                }
                            } else if (shot == 0 && edge_gates.count({a, b})) {
                                ++result.edge_gate_mismatches;
                            }
                        } else {
                            throw Error(codes::kInternalSimError,
                                        "gate '" + instr.gate + "' has no simulator unitary");
                        }
                        break;
                    }
                }
                assert(norm_is_unit(psi));
            }

            const int64_t basis = sample_basis_state(psi, rng);
            std::string key(measured.size(), '0');
            for (size_t i = 0; i < measured.size(); ++i) {
                bool bit = (basis >> measured[i]) & 1;
                const auto it = req.noise.readout_flip.find(measured[i]);
                if (it != req.noise.readout_flip.end() && rng.next_double() < it->second)
                    bit = !bit;
                if (bit) key[i] = '1';
            }
            ++result.counts[key];
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw Error(codes::kInternalSimError, ex.what());
    }
    result.timings.simulate_s = monotonic_seconds() - t0;
    return result;
}

Distribution counts_to_distribution(const std::map<std::string, uint64_t>& counts) {
    uint64_t total = 0;
    for (const auto& [key, n] : counts) {
        (void)key;
        total += n;
    }
    Distribution d;
    if (total == 0) return d;
    for (const auto& [key, n] : counts) d[key] = static_cast<double>(n) / static_cast<double>(total);
    return d;
}

double total_variation_distance(const Distribution& p, const Distribution& q) {
    auto total = [](const Distribution& d) {
        return std::accumulate(d.begin(), d.end(), 0.0,
                               [](double acc, const auto& kv) { return acc + kv.second; });
    };
    if (std::abs(total(p) - 1.0) > 1e-9 || std::abs(total(q) - 1.0) > 1e-9)
        throw Error(codes::kNotNormalized, "distributions must sum to 1");

    double sum = 0.0;
    auto it_p = p.begin();
    auto it_q = q.begin();
    while (it_p != p.end() || it_q != q.end()) {
        if (it_q == q.end() || (it_p != p.end() && it_p->first < it_q->first)) {
            sum += std::abs(it_p->second);
            ++it_p;
        } else if (it_p == p.end() || it_q->first < it_p->first) {
            sum += std::abs(it_q->second);
            ++it_q;
        } else {
            sum += std::abs(it_p->second - it_q->second);
            ++it_p;
            ++it_q;
        }
    }
    return 0.5 * sum;
}

}  // namespace vqpu
