#pragma once

#include <stdexcept>
#include <string>

namespace pbill {

/// Violated precondition on user-supplied input (geometry, positions, window).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not deliver a result it guarantees.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation requested too close to an unperturbed eigenvalue.
class PoleProximityError : public NumericalError {
public:
    PoleProximityError(const std::string& what, double pole, std::size_t mode_index)
        : NumericalError(what), pole_(pole), mode_index_(mode_index) {}

    double pole() const noexcept { return pole_; }
    std::size_t mode_index() const noexcept { return mode_index_; }

private:
    double pole_;
    std::size_t mode_index_;
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pbill
