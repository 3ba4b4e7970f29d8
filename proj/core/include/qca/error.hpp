#pragma once

#include <stdexcept>
#include <string>

namespace qca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates the invariants of its type (bad dimensions, non-unitary
/// collision, malformed file, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Site arithmetic left the range of the coordinate type.
class CoordinateOverflow : public Error {
 public:
  using Error::Error;
};

/// A sparse evolution produced more terms than the configured cap.
class TermCapExceeded : public Error {
 public:
  TermCapExceeded(std::size_t terms, std::size_t cap)
      : Error("sparse state grew to " + std::to_string(terms) +
              " terms, above the cap of " + std::to_string(cap)),
        terms_(terms),
        cap_(cap) {}

  std::size_t terms() const noexcept { return terms_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t terms_;
  std::size_t cap_;
};

/// A Heisenberg image escaped the support allowed by the declared
/// neighborhood.
class SupportLeakage : public Error {
 public:
  SupportLeakage(const std::string& what, double leakage)
      : Error(what), leakage_(leakage) {}
  double leakage() const noexcept { return leakage_; }

 private:
  double leakage_;
};

/// A stage of the structure pipeline failed. `stage()` names the stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace qca
