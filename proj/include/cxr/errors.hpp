#pragma once

#include <stdexcept>
#include <string>

namespace cxr {

// Bad configuration values or files (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Missing/unreadable/malformed data (CLI exit code 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Shape or alignment violations between in-memory objects.
struct StructuralError : std::logic_error {
  explicit StructuralError(const std::string& what) : std::logic_error(what) {}
};

// Argument outside an operation's mathematical domain.
struct DomainError : std::domain_error {
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Non-finite values or divergence during training (CLI exit code 4).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cxr
