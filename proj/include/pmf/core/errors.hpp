#pragma once

#include <stdexcept>
#include <string>

namespace pmf {

/// Base for every error raised by the library. Callers that only need to
/// report failures catch this; callers that recover (skip an object, map an
/// exit code) catch the specific subclass.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input dimensions disagree (matrix shapes, grid sizes, patch vs labels).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration field is out of range. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config." + field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed file contents (bad magic, truncated payload, bad JSON shape).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A container was written by an incompatible format version.
class VersionError : public FormatError {
 public:
  VersionError(const std::string& container, unsigned found, unsigned expected)
      : FormatError(container + " version " + std::to_string(found) +
                    " is not supported (expected " + std::to_string(expected) + ")") {}
};

/// A precondition on caller-supplied values failed.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Guidance map has no set bit: no pseudo-box can be chosen for this object.
class NoActivationError : public Error {
 public:
  using Error::Error;
};

/// Activation inside the pseudo-box is constant, so fg/bg points are undefined.
class UninformativeActivationError : public Error {
 public:
  using Error::Error;
};

/// Patch has fewer than 2Z pixels and cannot host Z points of each polarity.
class PatchTooSmallError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmf
