#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace consmax {

// Precondition on a value or shape was violated (empty vector, bad block size).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A model parameter is outside its domain (gamma <= 0, C <= 0, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Hardware model cannot be built for the requested configuration.
class BuildError : public std::runtime_error {
 public:
  explicit BuildError(std::string message, std::vector<std::string> offending = {})
      : std::runtime_error(std::move(message)), offending_(std::move(offending)) {}

  const std::vector<std::string>& offending() const noexcept { return offending_; }

 private:
  std::vector<std::string> offending_;
};

// Configuration document failed validation. Each issue is "<json path>: <message>".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  ConfigError(const std::string& path, const std::string& message)
      : ConfigError(std::vector<std::string>{path + ": " + message}) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out;
    for (const auto& s : issues) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace consmax
