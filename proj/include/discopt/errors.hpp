#pragma once

#include <stdexcept>
#include <string>

namespace discopt {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { invalid_argument, config, io, numerical, infeasible };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Raised for malformed input files; carries the 1-based line number.
struct ParseError : Error {
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::io, "line " + std::to_string(line) + ": " + what), line(line) {}
    std::size_t line;
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

} // namespace discopt
