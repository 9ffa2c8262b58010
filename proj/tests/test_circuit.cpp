#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vqpu/circuit.hpp"
#include "vqpu/errors.hpp"
#include "vqpu/util.hpp"

using namespace vqpu;

TEST_CASE("parses a plain native circuit") {
    const auto c = parse("qubits 2\nsx 0\ncz 0 1\nmeasure 0\nmeasure 1", "nqasm-1");
    CHECK(c.num_qubits == 2);
    REQUIRE(c.instructions.size() == 4);
    CHECK(c.instructions[0].kind == InstrKind::Gate);
    CHECK(c.instructions[0].gate == "sx");
    CHECK(c.instructions[1].operands == std::vector<int>{0, 1});
    CHECK(c.measured_qubits == std::vector<int>{0, 1});
}

TEST_CASE("rz takes a radian parameter; no measure means measure-all") {
    const auto c = parse("qubits 1\nrz 0 1.5707963", "nqasm-1");
    REQUIRE(c.instructions.size() == 1);
    CHECK(c.instructions[0].parameter.value() == doctest::Approx(1.5707963));
    CHECK(c.measured_qubits.empty());
    CHECK(measured_qubits_msb_first(c) == std::vector<int>{0});
}

TEST_CASE("unknown gate tokens are lexed, not rejected") {
    const auto c = parse("qubits 2\ncnot 0 1", "nqasm-1");
    REQUIRE(c.instructions.size() == 1);
    CHECK(c.instructions[0].gate == "cnot");
    CHECK(c.instructions[0].operands.size() == 2);
}

TEST_CASE("parse errors carry line numbers and offending tokens") {
    try {
        parse("qubits x", "nqasm-1");
        FAIL("expected PARSE_ERROR");
    } catch (const Error& e) {
        CHECK(e.code() == codes::kParseError);
        CHECK(e.detail().at("line") == 1);
        CHECK(e.detail().at("token") == "x");
    }

    try {
        parse("qubits 2\nsx 5", "nqasm-1");
        FAIL("expected PARSE_ERROR");
    } catch (const Error& e) {
        CHECK(e.code() == codes::kParseError);
        CHECK(e.detail().at("line") == 2);
    }
}

TEST_CASE("unknown dialects are rejected before parsing") {
    CHECK_THROWS_WITH_AS(parse("qubits 1", "qasm3"), doctest::Contains("qasm3"), Error);
    try {
        parse("qubits 1", "qasm3");
    } catch (const Error& e) {
        CHECK(e.code() == codes::kUnsupportedDialect);
    }
}

TEST_CASE("grammar corner cases") {
    CHECK_THROWS_AS(parse("sx 0", "nqasm-1"), Error);                       // missing qubits header
    CHECK_THROWS_AS(parse("qubits 2\nqubits 2", "nqasm-1"), Error);         // duplicate header
    CHECK_THROWS_AS(parse("qubits 2\ncz 0 0", "nqasm-1"), Error);           // non-distinct 2q operands
    CHECK_THROWS_AS(parse("qubits 2\nmeasure 0\nmeasure 0", "nqasm-1"), Error);  // measured twice
    CHECK_THROWS_AS(parse("qubits 0", "nqasm-1"), Error);
    CHECK_THROWS_AS(parse("qubits 2\nbarrier 1", "nqasm-1"), Error);
    CHECK_THROWS_AS(parse("qubits 2\nfoo 0 1 2", "nqasm-1"), Error);        // three operands
    CHECK_NOTHROW(parse("qubits 2\n# comment only\n\nbarrier\nreset 1", "nqasm-1"));
}

TEST_CASE("comments and blank lines are ignored") {
    const auto c = parse("qubits 2  # register\n# full comment\n\nsx 1 # trailing\n", "nqasm-1");
    REQUIRE(c.instructions.size() == 1);
    CHECK(c.instructions[0].operands == std::vector<int>{1});
}

TEST_CASE("symbol profile excludes syntactic constructs and keeps direction") {
    const auto c = parse("qubits 2\nsx 0\ncz 0 1\nmeasure 0\nmeasure 1", "nqasm-1");
    const auto prof = symbol_profile(c);
    CHECK(prof.gate_symbols == std::set<std::string>{"sx", "cz"});
    CHECK(prof.referenced_qubits == std::set<int>{0, 1});
    CHECK(prof.two_qubit_pairs == std::set<std::pair<int, int>>{{0, 1}});

    const auto both = symbol_profile(parse("qubits 2\ncz 1 0\ncz 0 1", "nqasm-1"));
    CHECK(both.two_qubit_pairs == std::set<std::pair<int, int>>{{0, 1}, {1, 0}});

    const auto measures_only = symbol_profile(parse("qubits 3\nbarrier\nmeasure 2", "nqasm-1"));
    CHECK(measures_only.gate_symbols.empty());
    CHECK(measures_only.referenced_qubits == std::set<int>{2});
    CHECK(measures_only.two_qubit_pairs.empty());
}

namespace {

// random nqasm-ish source, including unknown gate tokens
std::string random_source(Rng& rng) {
    const int n = 1 + static_cast<int>(rng.next_below(5));
    std::string src = "qubits " + std::to_string(n) + "\n";
    const int lines = static_cast<int>(rng.next_below(30));
    for (int i = 0; i < lines; ++i) {
        const int q = static_cast<int>(rng.next_below(n));
        switch (rng.next_below(7)) {
            case 0: src += "sx " + std::to_string(q) + "\n"; break;
            case 1: src += "rz " + std::to_string(q) + " 0.25\n"; break;
            case 2:
                if (n > 1) {
                    const int p = (q + 1) % n;
                    src += "cz " + std::to_string(q) + " " + std::to_string(p) + "\n";
                }
                break;
            case 3: src += "barrier\n"; break;
            case 4: src += "reset " + std::to_string(q) + "\n"; break;
            case 5: src += "mygate" + std::to_string(rng.next_below(3)) + " " + std::to_string(q) + "\n"; break;
            case 6: src += "id " + std::to_string(q) + "\n"; break;
        }
    }
    return src;
}

}  // namespace

TEST_CASE("property: parse/serialize round trip is stable") {
    Rng rng(20240810, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto src = random_source(rng);
        const auto once = parse(src, "nqasm-1");
        const auto twice = parse(serialize(once), "nqasm-1");
        REQUIRE(serialize(once) == serialize(twice));
        REQUIRE(once.num_qubits == twice.num_qubits);
        REQUIRE(once.instructions.size() == twice.instructions.size());
    }
}

TEST_CASE("property: symbol profile is invariant under barrier insertion") {
    Rng rng(99, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto src = random_source(rng);
        const auto base = parse(src, "nqasm-1");

        Circuit with_barriers = base;
        with_barriers.instructions.clear();
        for (const auto& instr : base.instructions) {
            with_barriers.instructions.push_back({InstrKind::Barrier, "", {}, std::nullopt, 0});
            with_barriers.instructions.push_back(instr);
        }
        const auto a = symbol_profile(base);
        const auto b = symbol_profile(with_barriers);
        REQUIRE(a.gate_symbols == b.gate_symbols);
        REQUIRE(a.referenced_qubits == b.referenced_qubits);
        REQUIRE(a.two_qubit_pairs == b.two_qubit_pairs);
    }
}

TEST_CASE("property: referenced qubits stay inside the declared register") {
    Rng rng(7, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = parse(random_source(rng), "nqasm-1");
        for (int q : symbol_profile(c).referenced_qubits) {
            REQUIRE(q >= 0);
            REQUIRE(q < c.num_qubits);
        }
    }
}

TEST_CASE("fuzz: arbitrary junk either parses or raises a typed parse error") {
    Rng rng(123456, 0);
    const std::string alphabet = "qubitsmeasurecz01 239\n#.x-";
    for (int trial = 0; trial < 300; ++trial) {
        std::string src;
        const auto len = rng.next_below(80);
        for (uint64_t i = 0; i < len; ++i) src += alphabet[rng.next_below(alphabet.size())];
        try {
            (void)parse(src, "nqasm-1");
        } catch (const Error& e) {
            REQUIRE(e.code() == codes::kParseError);
            REQUIRE(e.detail().contains("line"));
        }
    }
}
