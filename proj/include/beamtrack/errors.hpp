#pragma once

#include <stdexcept>
#include <string>

namespace beamtrack {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfPhysicalRange : std::domain_error {
    using std::domain_error::domain_error;
};

struct SingularFisher : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoSolution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AmbiguousSolution : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoImprovement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace beamtrack
