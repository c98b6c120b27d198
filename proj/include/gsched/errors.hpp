#pragma once

#include <stdexcept>
#include <string>

namespace gsched {

// Error classes map to distinct CLI exit codes (config=2, data=3, engine=4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct EngineError : std::runtime_error {
  explicit EngineError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gsched
