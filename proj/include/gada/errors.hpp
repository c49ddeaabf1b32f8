#pragma once

#include <stdexcept>
#include <string>

namespace gada {

// Error taxonomy shared across the library. The CLI maps these onto its
// exit-code contract (2 config, 3 I/O or malformed data, 4 shape mismatch).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent configuration values.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem failures: missing files, unwritable paths.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Structurally broken input data: unparseable lines, missing keys,
// invariant violations. The message names the offending record.
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Tensor/feature dimension disagreements between model, graph and checkpoint.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

}  // namespace gada
