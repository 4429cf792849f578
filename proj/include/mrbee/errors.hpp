#ifndef MRBEE_ERRORS_HPP
#define MRBEE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mrbee {

// Bad or unusable input: missing files, malformed tables, infeasible
// thresholds or configurations. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure during estimation (singular systems, invalid
// variance estimates). The CLI maps this to exit code 3.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mrbee

#endif  // MRBEE_ERRORS_HPP
