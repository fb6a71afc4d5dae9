#pragma once

#include <stdexcept>
#include <string>

namespace mttdsc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/arity violations in tensor and model plumbing.
struct DimensionError : Error {
  using Error::Error;
};

// Sentiment label outside {-1, 0, +1}.
struct LabelError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Malformed input files; messages carry line/record numbers.
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid but unusable inputs (empty stream, empty dataset, out-of-range target).
struct InputError : Error {
  using Error::Error;
};

// Bad run configuration (missing paths, incompatible sizes).
struct ConfigError : Error {
  using Error::Error;
};

// API misuse: mismatched traces, mixed ensemble variants, model/dataset mismatch.
struct UsageError : Error {
  using Error::Error;
};

// Checkpoint files that fail validation on reload.
struct LoadError : Error {
  using Error::Error;
};

}  // namespace mttdsc
