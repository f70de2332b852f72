#ifndef PCWK_ERROR_HPP
#define PCWK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pcwk {

/// Failure categories surfaced by the library. The CLI maps the numerical
/// ones to exit status 2 and the rest to 1.
enum class ErrorKind {
    invalid_argument,
    invalid_input,
    aliasing,
    singular_density,
    ill_posed,
    singular_factor,
    convergence,
    unsupported,
    infeasible_class,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::aliasing: return "aliasing";
    case ErrorKind::singular_density: return "singular-density";
    case ErrorKind::ill_posed: return "ill-posed-problem";
    case ErrorKind::singular_factor: return "singular-factor";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::infeasible_class: return "infeasible-class";
    }
    return "unknown";
}

inline bool is_numerical(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::singular_density:
    case ErrorKind::ill_posed:
    case ErrorKind::singular_factor:
    case ErrorKind::convergence:
    case ErrorKind::unsupported:
    case ErrorKind::infeasible_class:
    case ErrorKind::aliasing:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

} // namespace pcwk

#endif // PCWK_ERROR_HPP
