#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unibias {

enum class ErrorKind {
    NonPositiveDefinite,
    RankDeficient,
    SingularBlock,
    DimensionMismatch,
    NotLinear,
    BadLabels,
    Diverged,
    NoCrossing,
    CollinearModalities,
    BadDomain,
    NotSolvable,
    Tie,
    Validation,
    Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Raised for invalid configuration. `key` names the offending field so the
// CLI can report it.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& message);

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace unibias
