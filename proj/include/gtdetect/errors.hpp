#pragma once

#include <stdexcept>
#include <string>

namespace gtdetect {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// exit codes: UsageError -> 1, DataError -> 2, NumericError -> 3.

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gtdetect
