#pragma once

#include <stdexcept>
#include <string>

namespace dpr {

// Malformed or inconsistent input: bad files, schema violations, invalid
// parameters. The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The numerics could not produce an answer (singular system, solver did not
// converge). The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dpr
