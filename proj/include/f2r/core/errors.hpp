#pragma once

#include <stdexcept>
#include <string>

namespace f2r {

// Validation errors exit the CLI with code 1, everything else with code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public ValidationError {
public:
    explicit ConfigError(const std::string& msg) : ValidationError(msg) {}
};

class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParamError : public ValidationError {
public:
    explicit ParamError(const std::string& msg) : ValidationError(msg) {}
};

class ModeError : public std::runtime_error {
public:
    explicit ModeError(const std::string& msg) : std::runtime_error(msg) {}
};

class ProvenanceError : public std::runtime_error {
public:
    explicit ProvenanceError(const std::string& msg) : std::runtime_error(msg) {}
};

class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace f2r
