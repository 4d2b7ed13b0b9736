#pragma once

#include <stdexcept>
#include <string>

namespace syco {

// Invalid or inconsistent configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checksum or schema failure while loading a persisted artifact; exit code 4.
struct CorruptArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace syco
