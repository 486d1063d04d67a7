#pragma once

#include <stdexcept>
#include <string>

namespace rydbohm {

// Argument outside an operation's domain (non-positive field, bad basis, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An ODE integration could not proceed (step-size underflow, non-finite state).
class IntegrationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Iterative numerical procedure (eigensolver, quadrature, sampler) did not converge.
class ConvergenceFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Evaluation requested too close to a node of the wavefunction.
class NodeSingularity : public std::runtime_error {
public:
    NodeSingularity(double rho, double z, double amplitude)
        : std::runtime_error("wavefunction node at rho=" + std::to_string(rho) +
                             " z=" + std::to_string(z) +
                             " |psi|=" + std::to_string(amplitude)),
          rho_(rho), z_(z), amplitude_(amplitude) {}

    double rho() const noexcept { return rho_; }
    double z() const noexcept { return z_; }
    double amplitude() const noexcept { return amplitude_; }

private:
    double rho_;
    double z_;
    double amplitude_;
};

} // namespace rydbohm
