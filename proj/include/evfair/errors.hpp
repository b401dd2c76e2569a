#pragma once

#include <stdexcept>
#include <string>

namespace evfair {

/// Semantic error in a network description (cycle, bad ids, bad impedance, ...).
class NetworkError : public std::runtime_error {
public:
    explicit NetworkError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Syntactic error while reading a structured text file. Carries line/field context.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, int line, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

/// Error raised when a simulation step cannot continue (solver failure, bad config).
class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& msg, long step_index = -1)
        : std::runtime_error(step_index >= 0 ? "step " + std::to_string(step_index) + ": " + msg
                                             : msg),
          step_(step_index) {}

    long step_index() const { return step_; }

private:
    long step_;
};

} // namespace evfair
