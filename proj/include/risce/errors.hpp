#pragma once

#include <stdexcept>

namespace risce {

// Shape mismatch between operands, or an operation that cannot be
// satisfied at the given sizes (e.g. more orthonormal columns than rows).
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct index_error : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Numerical breakdown: SVD non-convergence, singular systems, violated
// numerical preconditions (non-Hermitian input where Hermitian is required).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Degenerate ambiguity-removal problem (zero pilot block, zero column).
struct alignment_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised by run_experiment when more than half of the trials fail at any
// grid point; maps to a dedicated CLI exit code.
struct experiment_abort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace risce
