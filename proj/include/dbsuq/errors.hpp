#pragma once

#include <stdexcept>
#include <string>

namespace dbsuq {

// Invalid user-facing configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical stage failed: singular system, non-finite state, no bracket,
// iteration cap (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dbsuq
