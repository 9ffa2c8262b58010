#pragma once

#include <exception>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace vqpu {

// Machine-readable error codes. This is the closed set used across the
// service, the agent protocol, and run-directory artifacts.
namespace codes {
inline constexpr const char* kParseError = "PARSE_ERROR";
inline constexpr const char* kUnsupportedDialect = "UNSUPPORTED_DIALECT";
inline constexpr const char* kUnsupportedGate = "UNSUPPORTED_GATE";
inline constexpr const char* kQubitOffline = "QUBIT_OFFLINE";
inline constexpr const char* kQubitOutOfRange = "QUBIT_OUT_OF_RANGE";
inline constexpr const char* kTopologyViolation = "TOPOLOGY_VIOLATION";
inline constexpr const char* kSnapshotInvalid = "SNAPSHOT_INVALID";
inline constexpr const char* kDeviceMismatch = "DEVICE_MISMATCH";
inline constexpr const char* kQubitLimitExceeded = "QUBIT_LIMIT_EXCEEDED";
inline constexpr const char* kInternalSimError = "INTERNAL_SIM_ERROR";
inline constexpr const char* kNotNormalized = "NOT_NORMALIZED";
inline constexpr const char* kAuthFailed = "AUTH_FAILED";
inline constexpr const char* kUnknownDevice = "UNKNOWN_DEVICE";
inline constexpr const char* kUnknownTask = "UNKNOWN_TASK";
inline constexpr const char* kUnknownJob = "UNKNOWN_JOB";
inline constexpr const char* kStoreError = "STORE_ERROR";
inline constexpr const char* kNotOwner = "NOT_OWNER";
inline constexpr const char* kIllegalTransition = "ILLEGAL_TRANSITION";
inline constexpr const char* kDeviceUnavailable = "DEVICE_UNAVAILABLE";
inline constexpr const char* kPayloadMalformed = "PAYLOAD_MALFORMED";
inline constexpr const char* kRunnerException = "RUNNER_EXCEPTION";
inline constexpr const char* kJobKilled = "JOB_KILLED";
inline constexpr const char* kJobNeverStarted = "JOB_NEVER_STARTED";
inline constexpr const char* kArtifactMissing = "ARTIFACT_MISSING";
inline constexpr const char* kArtifactMalformed = "ARTIFACT_MALFORMED";
inline constexpr const char* kSubmitRejected = "SUBMIT_REJECTED";
inline constexpr const char* kForceFailed = "FORCE_FAILED";
inline constexpr const char* kReplayWindowExceeded = "REPLAY_WINDOW_EXCEEDED";
}  // namespace codes

// Library-level typed failure. The HTTP layer maps codes to statuses; the
// runner maps them into error.json.
class Error : public std::exception {
  public:
    Error(std::string code, std::string message, nlohmann::json detail = nullptr)
        : code_(std::move(code)), message_(std::move(message)), detail_(std::move(detail)) {
        what_ = code_ + ": " + message_;
    }

    const char* what() const noexcept override { return what_.c_str(); }
    const std::string& code() const { return code_; }
    const std::string& message() const { return message_; }
    const nlohmann::json& detail() const { return detail_; }

  private:
    std::string code_;
    std::string message_;
    nlohmann::json detail_;
    std::string what_;
};

// Uniform wire schema for failures crossing module or process boundaries.
struct ErrorEnvelope {
    std::string code;
    std::string message;
    nlohmann::json detail = nullptr;
    std::string correlation_id;
    std::string timestamp;

    static ErrorEnvelope make(const std::string& code, const std::string& message,
                              nlohmann::json detail = nullptr);
    static ErrorEnvelope from(const Error& e) { return make(e.code(), e.message(), e.detail()); }

    nlohmann::ordered_json to_json() const;
    static ErrorEnvelope from_json(const nlohmann::json& j);
};

}  // namespace vqpu
