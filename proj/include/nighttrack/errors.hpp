#pragma once

#include <stdexcept>
#include <string>

namespace nighttrack {

// Error taxonomy for the whole library. Everything derives from Error so the
// CLI boundary can catch the family and map it to an exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct NumericsError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct DeterminismError : Error { using Error::Error; };
struct FreezeViolation : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct CheckpointError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct EvalError : Error { using Error::Error; };

}  // namespace nighttrack
