#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bpmud {

struct BpmudError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : BpmudError {
    using BpmudError::BpmudError;
};

struct ParameterError : BpmudError {
    using BpmudError::BpmudError;
};

// Asymptotic SIR has no finite value (sigma = 0).
struct DivergedLambdaError : BpmudError {
    using BpmudError::BpmudError;
};

/// Contraction factor >= 1: the geometric-rate estimate is vacuous.
struct NonContractiveError : BpmudError {
    using BpmudError::BpmudError;
};

// A message or vertex value became non-finite; carries the offending edge.
struct NumericalDivergenceError : BpmudError {
    std::size_t user;
    std::size_t chip;
    NumericalDivergenceError(std::size_t user_idx, std::size_t chip_idx)
        : BpmudError("non-finite value at edge (user " + std::to_string(user_idx) +
                     ", chip " + std::to_string(chip_idx) + ")"),
          user(user_idx), chip(chip_idx) {}
    // Vertex-level variant with a caller-supplied location description.
    NumericalDivergenceError(const std::string& what, std::size_t user_idx,
                             std::size_t chip_idx)
        : BpmudError(what), user(user_idx), chip(chip_idx) {}
};

struct UnsupportedDistributionError : BpmudError {
    using BpmudError::BpmudError;
};

struct SingularSystemError : BpmudError {
    using BpmudError::BpmudError;
};

struct ResourceLimitError : BpmudError {
    using BpmudError::BpmudError;
};

struct ConfigError : BpmudError {
    using BpmudError::BpmudError;
};

} // namespace bpmud
