#include "vqpu/oracle.hpp"

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "vqpu/errors.hpp"

namespace vqpu {

namespace {

using cdouble = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

constexpr cdouble kI{0.0, 1.0};

Matrix identity(int64_t dim) { return Matrix::Identity(dim, dim); }

// Expands a 2x2 operator acting on qubit q (qubit 0 = least significant bit)
// to the full register.
Matrix expand_1q(const Eigen::Matrix2cd& u, int q, int num_qubits) {
    const int64_t dim = int64_t{1} << num_qubits;
    Matrix full = Matrix::Zero(dim, dim);
    const int64_t mask = int64_t{1} << q;
    for (int64_t col = 0; col < dim; ++col) {
        const int64_t col_bit = (col & mask) ? 1 : 0;
        for (int64_t row_bit = 0; row_bit < 2; ++row_bit) {
            const int64_t row = (col & ~mask) | (row_bit ? mask : 0);
            full(row, col) += u(row_bit, col_bit);
        }
    }
    return full;
}

Eigen::Matrix2cd pauli(int which) {
    Eigen::Matrix2cd m;
    switch (which) {
        case 0: m << 1, 0, 0, 1; break;
        case 1: m << 0, 1, 1, 0; break;
        case 2: m << 0, -kI, kI, 0; break;
        default: m << 1, 0, 0, -1; break;
    }
    return m;
}

void conjugate(Matrix& rho, const Matrix& u) { rho = u * rho * u.adjoint(); }

void depolarize_1q(Matrix& rho, double p, int q, int n) {
    Matrix mixed = Matrix::Zero(rho.rows(), rho.cols());
    for (int k = 1; k <= 3; ++k) {
        const Matrix pk = expand_1q(pauli(k), q, n);
        mixed += pk * rho * pk.adjoint();
    }
    rho = (1.0 - p) * rho + (p / 3.0) * mixed;
}

void depolarize_2q(Matrix& rho, double p, int a, int b, int n) {
    Matrix mixed = Matrix::Zero(rho.rows(), rho.cols());
    for (int k = 1; k <= 15; ++k) {
        const Matrix pk = expand_1q(pauli(k / 4), a, n) * expand_1q(pauli(k % 4), b, n);
        mixed += pk * rho * pk.adjoint();
    }
    rho = (1.0 - p) * rho + (p / 15.0) * mixed;
}

void reset_channel(Matrix& rho, int q, int n) {
    // K0 = |0><0|, K1 = |0><1|
    Eigen::Matrix2cd k0, k1;
    k0 << 1, 0, 0, 0;
    k1 << 0, 1, 0, 0;
    const Matrix f0 = expand_1q(k0, q, n);
    const Matrix f1 = expand_1q(k1, q, n);
    rho = f0 * rho * f0.adjoint() + f1 * rho * f1.adjoint();
}

}  // namespace

Distribution density_oracle(const Circuit& circuit, const NoiseModel& noise) {
    const int n = circuit.num_qubits;
    if (n > 3)
        throw Error(codes::kQubitLimitExceeded, "density oracle supports at most 3 qubits");

    const int64_t dim = int64_t{1} << n;
    Matrix rho = Matrix::Zero(dim, dim);
    rho(0, 0) = 1.0;

    for (const auto& instr : circuit.instructions) {
        switch (instr.kind) {
            case InstrKind::Barrier:
            case InstrKind::Measure:
                break;
            case InstrKind::Reset:
                reset_channel(rho, instr.operands[0], n);
                break;
            case InstrKind::Gate: {
                if (instr.gate == "rz") {
                    Eigen::Matrix2cd u;
                    u << 1, 0, 0, std::exp(kI * instr.parameter.value_or(0.0));
                    conjugate(rho, expand_1q(u, instr.operands[0], n));
                } else if (instr.gate == "sx") {
                    Eigen::Matrix2cd u;
                    u << 0.5 * (1.0 + kI), 0.5 * (1.0 - kI), 0.5 * (1.0 - kI), 0.5 * (1.0 + kI);
                    conjugate(rho, expand_1q(u, instr.operands[0], n));
                    const auto it = noise.one_qubit_depol.find(instr.operands[0]);
                    if (it != noise.one_qubit_depol.end())
                        depolarize_1q(rho, it->second, instr.operands[0], n);
                } else if (instr.gate == "id" || instr.gate == "delay") {
                    // no-op
                } else if (instr.gate == "cz") {
                    const int a = instr.operands[0];
                    const int b = instr.operands[1];
                    Matrix u = identity(dim);
                    const int64_t mask = (int64_t{1} << a) | (int64_t{1} << b);
                    for (int64_t i = 0; i < dim; ++i) {
                        if ((i & mask) == mask) u(i, i) = -1.0;
                    }
                    conjugate(rho, u);
                    const auto it = noise.two_qubit_depol.find({a, b, instr.gate});
                    if (it != noise.two_qubit_depol.end())
                        depolarize_2q(rho, it->second, a, b, n);
                } else {
                    throw Error(codes::kInternalSimError,
                                "gate '" + instr.gate + "' has no oracle unitary");
                }
                break;
            }
        }
    }

    const auto measured = measured_qubits_msb_first(circuit);

    // Marginal over measured bits, then the per-qubit symmetric readout
    // confusion matrix [[1-r, r], [r, 1-r]].
    const size_t num_outcomes = size_t{1} << measured.size();
    std::vector<double> probs(num_outcomes, 0.0);
    for (int64_t basis = 0; basis < dim; ++basis) {
        size_t outcome = 0;
        for (size_t i = 0; i < measured.size(); ++i) {
            outcome <<= 1;
            outcome |= (basis >> measured[i]) & 1;
        }
        probs[outcome] += rho(basis, basis).real();
    }
    for (size_t i = 0; i < measured.size(); ++i) {
        const auto it = noise.readout_flip.find(measured[i]);
        if (it == noise.readout_flip.end()) continue;
        const double r = it->second;
        std::vector<double> next(num_outcomes, 0.0);
        const size_t bit = num_outcomes >> (i + 1);
        for (size_t k = 0; k < num_outcomes; ++k) {
            next[k] += probs[k] * (1.0 - r);
            next[k ^ bit] += probs[k] * r;
        }
        probs = std::move(next);
    }

    Distribution out;
    for (size_t k = 0; k < num_outcomes; ++k) {
        std::string key(measured.size(), '0');
        for (size_t i = 0; i < measured.size(); ++i) {
            if ((k >> (measured.size() - 1 - i)) & 1) key[i] = '1';
        }
        out[key] = probs[k];
    }
    return out;
}

}  // namespace vqpu
