#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopfr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// ---- expression language ---------------------------------------------------

class SyntaxError : public Error {
   public:
    SyntaxError(std::size_t offset, const std::string& message)
        : Error("syntax error at offset " + std::to_string(offset) + ": " + message),
          offset_(offset),
          message_(message) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& message() const noexcept { return message_; }

   private:
    std::size_t offset_;
    std::string message_;
};

class UnknownIdentifier : public Error {
   public:
    explicit UnknownIdentifier(std::string name)
        : Error("unknown identifier '" + name + "'"), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

   private:
    std::string name_;
};

class BadExponent : public Error {
   public:
    using Error::Error;
};

class DivisionByZero : public Error {
   public:
    DivisionByZero() : Error("division by zero") {}
};

class UnboundParameter : public Error {
   public:
    explicit UnboundParameter(std::string name)
        : Error("unbound parameter '" + name + "'"), name_(std::move(name)) {}
    const std::string& name() const noexcept { return name_; }

   private:
    std::string name_;
};

// ---- plant / system --------------------------------------------------------

class InvalidPlant : public Error {
   public:
    using Error::Error;
};

// ---- simulation ------------------------------------------------------------

class NonFiniteState : public Error {
   public:
    explicit NonFiniteState(double t)
        : Error("non-finite state at t = " + std::to_string(t)), time_(t) {}
    double time() const noexcept { return time_; }

   private:
    double time_;
};

class TooShort : public Error {
   public:
    using Error::Error;
};

// ---- response extraction ---------------------------------------------------

class NotSteady : public Error {
   public:
    using Error::Error;
};

class WindowTooShort : public Error {
   public:
    using Error::Error;
};

class ScheduleTooCoarse : public Error {
   public:
    using Error::Error;
};

class TruncationDominated : public Error {
   public:
    using Error::Error;
};

/// Abel extrapolants grow like 1/eps: the pole at the queried frequency is not simple.
class PoleOrderSuspect : public Error {
   public:
    using Error::Error;
};

class MismatchedQuery : public Error {
   public:
    using Error::Error;
};

// ---- lti / oracle / dmd ----------------------------------------------------

class SingularAtOmega : public Error {
   public:
    using Error::Error;
};

class DegenerateParameters : public Error {
   public:
    using Error::Error;
};

class RankDeficient : public Error {
   public:
    RankDeficient() : Error("snapshot matrix has numerical rank 0") {}
};

class EigenvalueNotFound : public Error {
   public:
    EigenvalueNotFound(double target, std::complex<double> nearest)
        : Error("no eigenvalue near i*" + std::to_string(target) + " (nearest " +
                std::to_string(nearest.real()) + (nearest.imag() < 0 ? "" : "+") +
                std::to_string(nearest.imag()) + "i)"),
          target_(target),
          nearest_(nearest) {}
    double target() const noexcept { return target_; }
    std::complex<double> nearest() const noexcept { return nearest_; }

   private:
    double target_;
    std::complex<double> nearest_;
};

// ---- io / config -----------------------------------------------------------

class IoError : public Error {
   public:
    using Error::Error;
};

class ConfigError : public Error {
   public:
    using Error::Error;
};

}  // namespace koopfr
