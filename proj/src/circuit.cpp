#include "vqpu/circuit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "vqpu/errors.hpp"

namespace vqpu {

namespace {

constexpr int kMaxDeclaredQubits = 100000;

[[noreturn]] void parse_fail(int line, const std::string& token, const std::string& why) {
    throw Error(codes::kParseError, why,
                nlohmann::json{{"line", line}, {"token", token}});
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool is_uint_token(const std::string& t) {
    if (t.empty()) return false;
    return std::all_of(t.begin(), t.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::optional<double> parse_real(const std::string& t) {
    const char* begin = t.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end != begin + t.size() || errno != 0) return std::nullopt;
    return v;
}

int parse_qubit(const std::string& t, int line, int num_qubits) {
    if (!is_uint_token(t)) parse_fail(line, t, "expected qubit index");
    int q = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), q);
    if (ec != std::errc{} || p != t.data() + t.size())
        parse_fail(line, t, "invalid qubit index");
    if (q >= num_qubits)
        parse_fail(line, t, "qubit index out of declared register");
    return q;
}

double parse_param(const std::string& t, int line) {
    const auto v = parse_real(t);
    if (!v) parse_fail(line, t, "expected numeric parameter");
    return *v;
}

}  // namespace

Circuit parse(std::string_view source, std::string_view dialect) {
    if (dialect != kSupportedDialect)
        throw Error(codes::kUnsupportedDialect,
                    "unsupported dialect: " + std::string(dialect));

    Circuit c;
    bool saw_qubits = false;
    std::set<int> measured;

    int line_no = 0;
    size_t pos = 0;
    while (pos <= source.size()) {
        const size_t eol = source.find('\n', pos);
        std::string_view raw = source.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                                : eol - pos);
        pos = (eol == std::string_view::npos) ? source.size() + 1 : eol + 1;
        ++line_no;

        if (const size_t hash = raw.find('#'); hash != std::string_view::npos)
            raw = raw.substr(0, hash);
        const auto tokens = split_ws(raw);
        if (tokens.empty()) continue;

        if (!saw_qubits) {
            if (tokens[0] != "qubits")
                parse_fail(line_no, tokens[0], "first statement must be 'qubits <N>'");
            if (tokens.size() != 2 || !is_uint_token(tokens[1]))
                parse_fail(line_no, tokens.size() > 1 ? tokens[1] : tokens[0],
                           "expected 'qubits <N>'");
            long n = std::strtol(tokens[1].c_str(), nullptr, 10);
            if (n <= 0 || n > kMaxDeclaredQubits)
                parse_fail(line_no, tokens[1], "qubit count out of range");
            c.num_qubits = static_cast<int>(n);
            saw_qubits = true;
            continue;
        }

        const std::string& head = tokens[0];
        Instruction instr;
        instr.line = line_no;

        if (head == "qubits") {
            parse_fail(line_no, head, "duplicate 'qubits' statement");
        } else if (head == "measure") {
            if (tokens.size() != 2) parse_fail(line_no, head, "measure takes one qubit");
            const int q = parse_qubit(tokens[1], line_no, c.num_qubits);
            if (!measured.insert(q).second)
                parse_fail(line_no, tokens[1], "qubit measured twice");
            instr.kind = InstrKind::Measure;
            instr.operands = {q};
            c.measured_qubits.push_back(q);
        } else if (head == "barrier") {
            if (tokens.size() != 1) parse_fail(line_no, tokens[1], "barrier takes no operands");
            instr.kind = InstrKind::Barrier;
        } else if (head == "reset") {
            if (tokens.size() != 2) parse_fail(line_no, head, "reset takes one qubit");
            instr.kind = InstrKind::Reset;
            instr.operands = {parse_qubit(tokens[1], line_no, c.num_qubits)};
        } else if (head == "rz" || head == "delay") {
            if (tokens.size() != 3) parse_fail(line_no, head, head + " takes '<q> <param>'");
            instr.kind = InstrKind::Gate;
            instr.gate = head;
            instr.operands = {parse_qubit(tokens[1], line_no, c.num_qubits)};
            instr.parameter = parse_param(tokens[2], line_no);
        } else if (head == "sx" || head == "id") {
            if (tokens.size() != 2) parse_fail(line_no, head, head + " takes one qubit");
            instr.kind = InstrKind::Gate;
            instr.gate = head;
            instr.operands = {parse_qubit(tokens[1], line_no, c.num_qubits)};
        } else if (head == "cz") {
            if (tokens.size() != 3) parse_fail(line_no, head, "cz takes two qubits");
            instr.kind = InstrKind::Gate;
            instr.gate = head;
            instr.operands = {parse_qubit(tokens[1], line_no, c.num_qubits),
                              parse_qubit(tokens[2], line_no, c.num_qubits)};
        } else {
            // Unknown gate token: lexed and kept so device-side admissibility
            // can reject it. Integer tokens are operands; at most one trailing
            // real-valued token is a parameter.
            instr.kind = InstrKind::Gate;
            instr.gate = head;
            for (size_t i = 1; i < tokens.size(); ++i) {
                if (is_uint_token(tokens[i]) && !instr.parameter) {
                    instr.operands.push_back(parse_qubit(tokens[i], line_no, c.num_qubits));
                } else if (!instr.parameter && i + 1 == tokens.size()) {
                    instr.parameter = parse_param(tokens[i], line_no);
                } else {
                    parse_fail(line_no, tokens[i], "unexpected token after gate operands");
                }
            }
            if (instr.operands.empty() || instr.operands.size() > 2)
                parse_fail(line_no, head, "gates take one or two qubit operands");
        }

        if (instr.kind == InstrKind::Gate && instr.operands.size() == 2 &&
            instr.operands[0] == instr.operands[1])
            parse_fail(line_no, head, "two-qubit gate operands must be distinct");

        c.instructions.push_back(std::move(instr));
    }

    if (!saw_qubits)
        throw Error(codes::kParseError, "empty circuit: missing 'qubits <N>'",
                    nlohmann::json{{"line", 1}, {"token", ""}});
    return c;
}

std::string serialize(const Circuit& c) {
    std::ostringstream out;
    out << "qubits " << c.num_qubits << "\n";
    for (const auto& instr : c.instructions) {
        switch (instr.kind) {
            case InstrKind::Measure:
                out << "measure " << instr.operands[0] << "\n";
                break;
            case InstrKind::Barrier:
                out << "barrier\n";
                break;
            case InstrKind::Reset:
                out << "reset " << instr.operands[0] << "\n";
                break;
            case InstrKind::Gate: {
                out << instr.gate;
                for (int q : instr.operands) out << " " << q;
                if (instr.parameter) {
                    std::ostringstream p;
                    p.precision(17);
                    p << *instr.parameter;
                    out << " " << p.str();
                }
                out << "\n";
                break;
            }
        }
    }
    return out.str();
}

SymbolProfile symbol_profile(const Circuit& c) {
    SymbolProfile prof;
    for (const auto& instr : c.instructions) {
        for (int q : instr.operands) prof.referenced_qubits.insert(q);
        if (instr.kind != InstrKind::Gate) continue;
        prof.gate_symbols.insert(instr.gate);
        if (instr.operands.size() == 2)
            prof.two_qubit_pairs.emplace(instr.operands[0], instr.operands[1]);
    }
    return prof;
}

std::vector<int> measured_qubits_msb_first(const Circuit& c) {
    std::vector<int> qs;
    if (c.measured_qubits.empty()) {
        for (int q = c.num_qubits - 1; q >= 0; --q) qs.push_back(q);
        return qs;
    }
    qs = c.measured_qubits;
    std::sort(qs.begin(), qs.end(), std::greater<int>());
    qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
    return qs;
}

}  // namespace vqpu
