// Error taxonomy shared across the toolkit. The CLI maps these to exit codes:
// ConfigError -> 1, DataError -> 2, NumericError -> 3.
#ifndef PROSODY_ERROR_HPP_
#define PROSODY_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace prosody {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace prosody

#endif  // PROSODY_ERROR_HPP_
