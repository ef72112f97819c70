#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace matmuon {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class InvalidMatrix : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class SvdNoConverge : public Error {
public:
    using Error::Error;
};

class ZeroInput : public Error {
public:
    using Error::Error;
};

class UnsupportedMode : public Error {
public:
    using Error::Error;
};

class DegenerateSpectrum : public Error {
public:
    using Error::Error;
};

class PreconditionUnchecked : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

// Thrown when an iterate or momentum goes non-finite during a run.
class DivergenceDetected : public Error {
public:
    explicit DivergenceDetected(std::int64_t step)
        : Error("non-finite iterate at step " + std::to_string(step)), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

} // namespace matmuon
