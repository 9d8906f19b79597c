#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fairedge {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite numbers, out-of-range arguments, mismatched dimensions.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Malformed trace file or scenario document. `location` is either a line
// number ("line 7") or a field path ("ues[2].channel.gain").
class ParseError : public Error {
 public:
  ParseError(std::string location, const std::string& what)
      : Error(location + ": " + what), location_(std::move(location)) {}

  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

// Secrecy rate is zero: the eavesdropper channel is at least as strong as the
// legitimate one, so nothing may be transmitted.
class InsecureLinkError : public Error {
 public:
  using Error::Error;
};

// No plan satisfies every constraint. `blocking_users` lists the UEs that
// could not be served.
class InfeasibleScenarioError : public Error {
 public:
  InfeasibleScenarioError(const std::string& what, std::vector<std::size_t> users)
      : Error(what), blocking_users_(std::move(users)) {}

  const std::vector<std::size_t>& blocking_users() const noexcept { return blocking_users_; }

 private:
  std::vector<std::size_t> blocking_users_;
};

// An exhaustive oracle was asked to enumerate more than its budget allows.
class SizeGuardError : public Error {
 public:
  using Error::Error;
};

// Persisted bundle written by an incompatible schema version.
class SchemaVersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairedge
