#ifndef OZSL_ERRORS_HPP
#define OZSL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ozsl {

/// Base of every error raised by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Input/contract failures. The CLI maps these to exit code 2.
class validation_error : public error {
  public:
    using error::error;
};

class dimension_error : public validation_error {
  public:
    using validation_error::validation_error;
};

class domain_error : public validation_error {
  public:
    using validation_error::validation_error;
};

class contract_error : public validation_error {
  public:
    using validation_error::validation_error;
};

class format_error : public validation_error {
  public:
    using validation_error::validation_error;
};

// Runtime failures. The CLI maps these to exit code 3.
class runtime_failure : public error {
  public:
    using error::error;
};

/// A value became NaN or infinite.
class numeric_error : public runtime_failure {
  public:
    using runtime_failure::runtime_failure;
};

class training_error : public runtime_failure {
  public:
    using runtime_failure::runtime_failure;
};

/// The known-class regions leave no room for complementary samples.
class degenerate_geometry_error : public runtime_failure {
  public:
    using runtime_failure::runtime_failure;
};

/// Weibull tail with no spread; the likelihood has no finite maximizer.
class flat_tail_error : public runtime_failure {
  public:
    using runtime_failure::runtime_failure;
};

class calibration_error : public runtime_failure {
  public:
    using runtime_failure::runtime_failure;
};

}  // namespace ozsl

#endif  // OZSL_ERRORS_HPP
