#pragma once

#include <stdexcept>
#include <string>

namespace fedicu {

// Bad shapes, bad hyperparameters, malformed config or data files.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf where finite values are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: eval-mode cache fed to backward, mismatched parameter sets, etc.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedicu
