#pragma once

#include <stdexcept>
#include <string>

namespace dpsnn {

// Every error carries the process exit code the CLI reports for its class.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

class EncodingError : public Error {
public:
    explicit EncodingError(const std::string& what) : Error(what, 3) {}
};

class TopologyError : public Error {
public:
    explicit TopologyError(const std::string& what) : Error(what, 4) {}
};

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& what) : Error(what, 5) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, 6) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, 7) {}
};

class AnalysisError : public Error {
public:
    explicit AnalysisError(const std::string& what) : Error(what, 8) {}
};

}  // namespace dpsnn
