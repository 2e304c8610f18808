#pragma once

#include <stdexcept>
#include <string>

namespace apfk {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Index-set construction / membership failures (cardinality cap, bad parameters).
struct index_error : error {
    using error::error;
};

// Series-level failures: incompatible index sets, singular reciprocal,
// power series not converged within the term cap.
struct series_error : error {
    using error::error;
};

// A small divisor fell below the configured floor with policy=error.
struct divisor_error : error {
    using error::error;
};

// Base for failures of a whole solve.
struct solve_error : error {
    using error::error;
};

// Correction left the composition domain (|delta| >= iota).
struct margin_error : solve_error {
    using solve_error::solve_error;
};

// Condition numbers blew past the configured caps.
struct condition_error : solve_error {
    using solve_error::solve_error;
};

// Residuals grew twice in a row above the floor.
struct divergence_error : solve_error {
    using solve_error::solve_error;
};

// Malformed configuration; message carries the field path.
struct config_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

} // namespace apfk
