#pragma once

#include <stdexcept>

namespace fca {

/// Argument outside a model's domain (t < t0, D^2 < 0, tau <= 0 for the piecewise map, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The scheme cannot continue (non-monotone remap, negative diffusion in a simulation, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reading or writing an artifact failed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fca
