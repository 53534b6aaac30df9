#pragma once

#include <stdexcept>
#include <string>

namespace cecluster {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { success = 0, usage = 1, data = 2, numerical = 3 };

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual ExitCode exit_code() const noexcept = 0;
};

// Violated preconditions: bad arguments, out-of-domain probabilities,
// mismatched dimensions.
class ContractError : public Error {
  public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::usage; }
};

// Malformed or degenerate input data.
class DataError : public Error {
  public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

// Factorization failures, optimizer non-convergence and similar.
class NumericalError : public Error {
  public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::numerical; }
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ContractError(message);
    }
}

}  // namespace detail
}  // namespace cecluster
