#pragma once

#include <stdexcept>
#include <string>

namespace gpctc {

// Cholesky or other conditioning problem that survived all safeguards.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A stability-analysis constraint cannot be satisfied (empty epsilon
// interval, nonpositive v1/v2/xi, ...). The message names the violated term.
class infeasibility_error : public std::runtime_error {
public:
    explicit infeasibility_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Implicit forward dynamics did not converge.
class dynamics_error : public std::runtime_error {
public:
    explicit dynamics_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gpctc
