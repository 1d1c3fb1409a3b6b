#pragma once

#include <stdexcept>
#include <string>

namespace mfit {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: wrong dimensions, empty sets, out-of-range parameters.
class InputError : public Error {
public:
    using Error::Error;
};

/// Model parameters that do not describe a usable geometric entity.
class DegenerateModelError : public Error {
public:
    using Error::Error;
};

/// Numerical or combinatorial failure inside an estimator.
class AlgorithmError : public Error {
public:
    using Error::Error;
};

/// IKOSE cannot proceed because K is not below the estimated inlier count.
class BreakdownError : public AlgorithmError {
public:
    using AlgorithmError::AlgorithmError;
};

/// The K-th ordered residual is exactly zero (noise-free data).
class ZeroScaleError : public AlgorithmError {
public:
    using AlgorithmError::AlgorithmError;
};

/// The inlier threshold was never exceeded by a consensus set.
class InsufficientInliersError : public AlgorithmError {
public:
    using AlgorithmError::AlgorithmError;
};

}  // namespace mfit
