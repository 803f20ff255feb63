#pragma once

#include <stdexcept>
#include <string>

namespace qtgp {

enum class ErrorKind {
    NonSquare,
    Degenerate,
    DimensionMismatch,
    ZeroState,
    StepUnderflow,
    AnnihilatedState,
    ZeroOverlap,
    BranchLost,
    WeightsVary,
    SchmidtDegenerate,
    ZeroExpectation,
    NoTransition,
    NoConvergence,
    InvalidArgument,
};

const char* kind_name(ErrorKind k) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind k, const std::string& what)
        : std::runtime_error(std::string(kind_name(k)) + ": " + what), kind_(k) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace qtgp
