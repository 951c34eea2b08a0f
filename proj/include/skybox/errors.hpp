#pragma once

#include <stdexcept>
#include <string>

namespace skybox {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or incomplete run configuration (rejected before any compute).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed input data; carries the offending location when known.
class ParseError : public Error {
public:
    ParseError(const std::string& path, std::size_t row, const std::string& what)
        : Error(path + ":" + std::to_string(row) + ": " + what), path_(path), row_(row) {}
    explicit ParseError(const std::string& what) : Error(what), row_(0) {}

    const std::string& path() const { return path_; }
    std::size_t row() const { return row_; }

private:
    std::string path_;
    std::size_t row_;
};

/// Semantically invalid data (values out of domain, degenerate series, ...).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

/// CoV is undefined for series with non-positive mean (all-zero or degenerate trace).
class UndefinedCovError : public DataError {
public:
    explicit UndefinedCovError(const std::string& what) : DataError(what) {}
};

/// Solver exhausted its budget without finding any incumbent.
class SolveError : public Error {
public:
    explicit SolveError(const std::string& what) : Error(what) {}
};

/// Process exit codes used by the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfigError = 2,
    kExitDataError = 3,
    kExitRuntimeError = 4,
};

}  // namespace skybox
