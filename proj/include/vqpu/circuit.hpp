#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vqpu {

enum class InstrKind { Gate, Measure, Barrier, Reset };

struct Instruction {
    InstrKind kind = InstrKind::Gate;
    std::string gate;            // present iff kind == Gate
    std::vector<int> operands;   // 1 or 2 qubit indices (empty for barrier)
    std::optional<double> parameter;
    int line = 0;                // 1-based source line, kept for diagnostics
};

// A parsed circuit in the nqasm-1 native-gate dialect. Instruction order is
// preserved exactly as written. measured_qubits lists explicit `measure`
// statements in order; empty means "measure the full register at the end".
struct Circuit {
    int num_qubits = 0;
    std::vector<Instruction> instructions;
    std::vector<int> measured_qubits;
};

inline constexpr const char* kSupportedDialect = "nqasm-1";

// Parses nqasm-1 source. Unknown gate tokens are accepted (device-side
// admissibility rejects them later); malformed statements raise
// Error{PARSE_ERROR} with the line number and offending token, and unknown
// dialect identifiers raise Error{UNSUPPORTED_DIALECT} before any parsing.
Circuit parse(std::string_view source, std::string_view dialect);

// Canonical text form. parse(serialize(parse(s))) == parse(s).
std::string serialize(const Circuit& c);

struct SymbolProfile {
    std::set<std::string> gate_symbols;            // excludes barrier/measure/reset
    std::set<int> referenced_qubits;
    std::set<std::pair<int, int>> two_qubit_pairs; // operand order preserved
};

// Single pass over the instruction list; invariant under barrier insertion.
SymbolProfile symbol_profile(const Circuit& c);

// Measured qubits as distinct indices, descending; highest index is the
// most significant bit of result bitstrings. Falls back to the full register
// when the circuit has no measure statements.
std::vector<int> measured_qubits_msb_first(const Circuit& c);

}  // namespace vqpu
