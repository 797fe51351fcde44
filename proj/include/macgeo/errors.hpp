#pragma once

#include <stdexcept>
#include <string>

namespace macgeo {

/// Base of every error signalled by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class invalid_argument_error : public error {
public:
    using error::error;
};

/// Evaluation point (numerically) coincides with a transmitter.
class singularity_error : public error {
public:
    using error::error;
};

/// SIR requested with no interferers.
class infinite_sir_error : public error {
public:
    using error::error;
};

/// A moment or lattice sum that does not exist (alpha <= 2, E[F^s] with s <= -1, ...).
class divergence_error : public error {
public:
    using error::error;
};

/// Alternating series lost too many digits to cancellation.
class precision_loss_error : public error {
public:
    using error::error;
};

/// Operation is not defined for the requested fading model.
class unsupported_model_error : public error {
public:
    using error::error;
};

/// Contour tracing exhausted its step budget without closing.
class non_closure_error : public error {
public:
    using error::error;
};

/// Gradient vanished while following a level set.
class stationary_point_error : public error {
public:
    using error::error;
};

/// No SIR crossing inside the search radius: the reception area is unbounded
/// (or the component cannot be reached from the requested direction).
class unbounded_region_error : public error {
public:
    using error::error;
};

/// An output file could not be opened or written.
class output_error : public error {
public:
    using error::error;
};

namespace detail {

inline void require(bool condition, const std::string& what)
{
    if (!condition)
        throw invalid_argument_error(what);
}

} // namespace detail

} // namespace macgeo
