#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace springverb {

// Scalar type for all tensor data. Selected at configure time; the 64-bit
// build is required for finite-difference gradient verification.
#ifdef SPRINGVERB_REAL32
using real = float;
inline constexpr const char* kScalarName = "f32";
#else
using real = double;
inline constexpr const char* kScalarName = "f64";
#endif

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Worker cap shared by the few parallel sections (eval metrics). Reads
// SPRINGVERB_THREADS once; values < 1 fall back to 1.
int worker_count();

}  // namespace springverb
