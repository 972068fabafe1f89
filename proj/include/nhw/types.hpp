#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nhw {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

enum class Field { real, complex };

inline const char* to_string(Field f) { return f == Field::real ? "real" : "complex"; }

// Error taxonomy. CLI maps ConfigError to exit 2, everything else to exit 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct PoleError : NumericError {
    using NumericError::NumericError;
};
struct InfeasibleError : NumericError {
    using NumericError::NumericError;
};
struct DegenerateError : NumericError {
    using NumericError::NumericError;
};
struct PrecisionError : NumericError {
    using NumericError::NumericError;
};
struct ConditioningError : NumericError {
    ConditioningError(const std::string& msg, double c) : NumericError(msg), condition(c) {}
    double condition;
};

inline constexpr double kPi = 3.14159265358979323846264338327950288;

}  // namespace nhw
