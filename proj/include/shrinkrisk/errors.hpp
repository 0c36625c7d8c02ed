#pragma once

#include <stdexcept>
#include <string>

namespace shrinkrisk {

/// Malformed input: wrong dimensions, negative variances, unsorted grids.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Ridge with lambda = 0 on a singular second-moment matrix.
class SingularityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The symmetric eigen-solver did not converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two independent formula routes disagree. Always an implementation bug.
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace shrinkrisk
