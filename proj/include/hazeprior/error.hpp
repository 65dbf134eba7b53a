#pragma once

#include <stdexcept>

namespace hazeprior {

/// Problem with user-supplied data: empty dataset, empty light bank,
/// checkpoint that does not match the expected architecture.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or gradient.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hazeprior
