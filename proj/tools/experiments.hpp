#pragma once

#include <string>

namespace CLI {
class App;
}

// Registers the `exp` subcommands (latency, fidelity, binding, recovery,
// concurrency). Each runs one evaluation scenario end-to-end against a
// running server through the public API, spawning agent processes as the
// scenario requires, and writes a machine-readable report.
void register_experiments(CLI::App& app, std::string& server_url, std::string& api_key,
                          int& exit_code);
