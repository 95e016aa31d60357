#pragma once

#include <stdexcept>
#include <string>

namespace ssgan {

// Extent/rank violations. The message names the offending axis.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (bad geometry, bad hyperparameter, zero-size output).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken API contract (non-scalar loss, double normalization, empty supervision).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content. Messages carry the byte offset where parsing failed.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset-level problems: missing channels or masks, empty pools, absent ids.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (losses, gradients).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A verification oracle could not run (e.g. the probed function is not
// deterministic, so central differences are meaningless).
struct OracleError : std::runtime_error {
    explicit OracleError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace ssgan
