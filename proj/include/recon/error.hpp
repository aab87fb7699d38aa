#pragma once

#include <stdexcept>
#include <string>

namespace recon {

// Input data is missing, malformed or inconsistent. Maps to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or configuration supplied by the caller. Maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace recon
