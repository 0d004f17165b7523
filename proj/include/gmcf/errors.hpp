#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmcf {

// Numeric integration failure; carries the tolerance that was actually reached.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& msg, double achieved, double requested)
        : std::runtime_error(msg + " (achieved tol " + std::to_string(achieved) +
                             ", requested " + std::to_string(requested) + ")"),
          achieved_tol(achieved),
          requested_tol(requested) {}

    double achieved_tol;
    double requested_tol;
};

// Positive-definiteness violation in a synthesized spectrum.
class SpectrumError : public std::runtime_error {
public:
    SpectrumError(const std::string& msg, std::size_t frequency)
        : std::runtime_error(msg + " (frequency " + std::to_string(frequency) + ")"),
          frequency(frequency) {}

    std::size_t frequency;
};

// Invalid configuration; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gmcf
