#pragma once

#include <stdexcept>

namespace plapf {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidGraphError : Error { using Error::Error; };
struct LoadError : Error { using Error::Error; };
struct SplitError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct SolveError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };
struct DegenerateDegreeError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };

}  // namespace plapf
