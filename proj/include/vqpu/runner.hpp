#pragma once

#include <filesystem>

namespace vqpu {

// Hermetic execution of one run directory: reads payload.json, rebuilds the
// device context and noise model from the bound snapshot, validates,
// simulates and writes result.json + timings.json (or error.json). Returns
// the process exit code: 0 on success, nonzero with error.json written.
// Never touches anything outside the directory and opens no connection.
int execute_run_directory(const std::filesystem::path& run_directory);

}  // namespace vqpu
