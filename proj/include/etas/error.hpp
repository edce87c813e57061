#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace etas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument or value outside the domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input text (headers, config files, JSON documents).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A single unparseable data row.
class RowError : public FormatError {
 public:
  RowError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TransportError : public Error {
 public:
  TransportError(int status, const std::string& what) : Error(what), status_(status) {}
  [[nodiscard]] int status() const noexcept { return status_; }

 private:
  int status_;
};

// Failures inside numerical routines: stalls, NaNs, vanishing intensities.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SupercriticalError : public DomainError {
 public:
  SupercriticalError(double alpha, double beta)
      : DomainError("branching ratio undefined: beta (" + std::to_string(beta) +
                    ") must exceed alpha (" + std::to_string(alpha) + ")"),
        alpha_(alpha),
        beta_(beta) {}
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] double beta() const noexcept { return beta_; }

 private:
  double alpha_;
  double beta_;
};

}  // namespace etas
