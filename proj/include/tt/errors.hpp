#pragma once

#include <stdexcept>
#include <string>

namespace tt {

// Configuration problems (bad dimensions, invalid window/block settings,
// checkpoint/model mismatch). The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with corpus files or generated data. CLI exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension mismatches inside the numerics core.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Rectangle/region coordinate violations in tagging or decoding.
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tt
