#pragma once

#include <stdexcept>
#include <string>

namespace gridiv {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- numerics --------------------------------------------------------------

class SingularMatrix : public Error {
public:
    explicit SingularMatrix(const std::string& msg) : Error(msg) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

class NonFiniteEvaluation : public Error {
public:
    explicit NonFiniteEvaluation(const std::string& msg) : Error(msg) {}
};

// -- network / documents ----------------------------------------------------

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class VoltageCollapse : public Error {
public:
    explicit VoltageCollapse(const std::string& msg) : Error(msg) {}
};

// -- forecast ----------------------------------------------------------------

class MissingFeature : public Error {
public:
    explicit MissingFeature(const std::string& msg) : Error(msg) {}
};

class MissingModel : public Error {
public:
    explicit MissingModel(const std::string& msg) : Error(msg) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class DivergedTraining : public Error {
public:
    explicit DivergedTraining(const std::string& msg) : Error(msg) {}
};

// -- solvers -----------------------------------------------------------------

class DidNotConverge : public Error {
public:
    DidNotConverge(const std::string& msg, std::size_t iterations, double residual)
        : Error(msg), iterations_(iterations), residual_(residual) {}

    std::size_t iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    std::size_t iterations_ = 0;
    double residual_ = 0.0;
};

class UnconvergedSolution : public Error {
public:
    explicit UnconvergedSolution(const std::string& msg) : Error(msg) {}
};

class AllRestartsFailed : public Error {
public:
    explicit AllRestartsFailed(const std::string& msg) : Error(msg) {}
};

}  // namespace gridiv
