#ifndef PEIV_ERRORS_HPP
#define PEIV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace peiv {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated precondition or dimension mismatch in a public operation.
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

// Bad or inconsistent user configuration (files, priors, settings).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// F(theta) has spectral radius >= 1, no stationary covariance exists.
class NonStationaryError : public Error {
 public:
  explicit NonStationaryError(const std::string& msg) : Error(msg) {}
};

// Rank-deficient regressor: the parameter is not identifiable from the data.
class UnidentifiableError : public Error {
 public:
  explicit UnidentifiableError(const std::string& msg) : Error(msg) {}
};

// A factorization or solve failed where the math promises positive
// definiteness; usually a sign of an ill-posed instance.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// A linearized estimator produced non-finite values.
class DivergenceError : public NumericalError {
 public:
  explicit DivergenceError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace peiv

#endif  // PEIV_ERRORS_HPP
