#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reprog {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when the dimensional assumptions d_T <= d_S or K_T <= K_S fail.
struct AssumptionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::size_t offset;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedModeError : std::logic_error {
  using std::logic_error::logic_error;
};

struct TransportError : std::runtime_error {
  TransportError(const std::string& what, std::size_t rows_received)
      : std::runtime_error(what), rows_received(rows_received) {}
  std::size_t rows_received;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace reprog
