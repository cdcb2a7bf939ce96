#pragma once

#include <stdexcept>
#include <string>

namespace langact {

// Failure categories that surface as stable CLI exit codes.
enum class ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kData = 2,
    kNumeric = 3,
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files, vocab/checkpoint mismatches.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values, diverged training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace langact
