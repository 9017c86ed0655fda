#include "unibias/errors.hpp"

#include <utility>

namespace unibias {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::SingularBlock: return "SingularBlock";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotLinear: return "NotLinear";
        case ErrorKind::BadLabels: return "BadLabels";
        case ErrorKind::Diverged: return "Diverged";
        case ErrorKind::NoCrossing: return "NoCrossing";
        case ErrorKind::CollinearModalities: return "CollinearModalities";
        case ErrorKind::BadDomain: return "BadDomain";
        case ErrorKind::NotSolvable: return "NotSolvable";
        case ErrorKind::Tie: return "Tie";
        case ErrorKind::Validation: return "Validation";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

ValidationError::ValidationError(std::string key, const std::string& message)
    : Error(ErrorKind::Validation, key + ": " + message), key_(std::move(key)) {}

}  // namespace unibias
