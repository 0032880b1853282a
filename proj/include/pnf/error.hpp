#ifndef PNF_ERROR_HPP
#define PNF_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace pnf
{

enum class ErrorKind {
    InvalidArgument,
    ZeroDivide,
    DimensionMismatch,
    NonInvertibleLinearPart,
    NotVanishingOnGamma,
    NotPoisson,
    StructuralMismatch,
    EigenvalueCollision,
    ComplexSpectrum,
    NonProportionalSpectrum,
    KVanishes,
    ResonantInput,
    ResonantDivisor,
    UnexpectedMonomial,
    NonConstantResidual,
    ZeroModularTrace,
    NotInPositiveOrthant,
    IntegrationFailure,
    SchemaError,
    SkewViolation,
};

inline std::string_view to_string(ErrorKind k)
{
    switch (k) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ZeroDivide: return "ZeroDivide";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NonInvertibleLinearPart: return "NonInvertibleLinearPart";
        case ErrorKind::NotVanishingOnGamma: return "NotVanishingOnGamma";
        case ErrorKind::NotPoisson: return "NotPoisson";
        case ErrorKind::StructuralMismatch: return "StructuralMismatch";
        case ErrorKind::EigenvalueCollision: return "EigenvalueCollision";
        case ErrorKind::ComplexSpectrum: return "ComplexSpectrum";
        case ErrorKind::NonProportionalSpectrum: return "NonProportionalSpectrum";
        case ErrorKind::KVanishes: return "KVanishes";
        case ErrorKind::ResonantInput: return "ResonantInput";
        case ErrorKind::ResonantDivisor: return "ResonantDivisor";
        case ErrorKind::UnexpectedMonomial: return "UnexpectedMonomial";
        case ErrorKind::NonConstantResidual: return "NonConstantResidual";
        case ErrorKind::ZeroModularTrace: return "ZeroModularTrace";
        case ErrorKind::NotInPositiveOrthant: return "NotInPositiveOrthant";
        case ErrorKind::IntegrationFailure: return "IntegrationFailure";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::SkewViolation: return "SkewViolation";
    }
    return "Unknown";
}

// Every failure raised by the library carries its kind so that callers (the CLI
// in particular) can map it onto a stable exit code.
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), m_kind(kind)
    {
    }

    ErrorKind kind() const noexcept
    {
        return m_kind;
    }

private:
    ErrorKind m_kind;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string &what)
{
    throw Error(kind, what);
}

} // namespace pnf

#endif
