#pragma once

#include <stdexcept>
#include <string>

namespace pcvox {

// File could not be parsed; line is 1-based when known, 0 otherwise.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

class UnsupportedFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A caller violated a documented precondition.
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Decoder ran out of payload bytes.
class TruncationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Decoded data is internally inconsistent (corruption, model mismatch, ...).
class IntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or gradient.
class TrainingDiverged : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace pcvox
