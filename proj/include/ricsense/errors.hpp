#pragma once

#include <stdexcept>
#include <string>

namespace ricsense {

/// Failure classes surfaced by the library. `validation` covers malformed or
/// inconsistent inputs, everything else is a named numerical condition.
enum class ErrorCode {
    validation,
    dimension_mismatch,
    near_singular,
    not_stabilizable,
    numerical_failure,
    not_stable,
    not_uncoupled,
    not_block_diagonal,
    out_of_domain,
    zero_diagonal_block,
    rho_violated,
    not_converged,
    empty_mask,
    non_finite,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::validation: return "validation";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::near_singular: return "near_singular";
        case ErrorCode::not_stabilizable: return "not_stabilizable";
        case ErrorCode::numerical_failure: return "numerical_failure";
        case ErrorCode::not_stable: return "not_stable";
        case ErrorCode::not_uncoupled: return "not_uncoupled";
        case ErrorCode::not_block_diagonal: return "not_block_diagonal";
        case ErrorCode::out_of_domain: return "out_of_domain";
        case ErrorCode::zero_diagonal_block: return "zero_diagonal_block";
        case ErrorCode::rho_violated: return "rho_violated";
        case ErrorCode::not_converged: return "not_converged";
        case ErrorCode::empty_mask: return "empty_mask";
        case ErrorCode::non_finite: return "non_finite";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// True for input problems (exit code 2 in the CLI), false for numerical
    /// failures (exit code 3).
    bool is_validation() const noexcept {
        return code_ == ErrorCode::validation || code_ == ErrorCode::dimension_mismatch;
    }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace ricsense
