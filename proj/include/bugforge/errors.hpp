#pragma once

#include <stdexcept>
#include <string>

namespace bugforge {

// Base type for everything this library throws on its own behalf.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input: unparsable source text, bad JSON, schema violations.
// line/col are 1-based when they refer to source text, 0 when unknown.
struct ParseError : Error {
  ParseError(const std::string& msg, int line = 0, int col = 0)
      : Error(col > 0 ? msg + " at " + std::to_string(line) + ":" + std::to_string(col)
                      : (line > 0 ? msg + " at line " + std::to_string(line) : msg)),
        line(line),
        col(col) {}
  int line;
  int col;
};

// Invalid configuration values (bad ratios, impossible shapes, unknown enums).
struct ConfigError : Error {
  using Error::Error;
};

// File-level failures: missing paths, unreadable/unwritable files.
struct IoError : Error {
  using Error::Error;
};

// Raised when a training step produces a non-finite loss.
struct TrainingDiverged : Error {
  TrainingDiverged(long long step, const std::string& what)
      : Error("training diverged at step " + std::to_string(step) + ": " + what), step(step) {}
  long long step;
};

}  // namespace bugforge
