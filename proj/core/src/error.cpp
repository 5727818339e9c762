#include "ldbuffer/error.hpp"

namespace ldb {

std::string_view kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::UnboundedDual: return "UnboundedDual";
    case ErrorKind::InfiniteCost: return "InfiniteCost";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::BracketExhausted: return "BracketExhausted";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::DriftAtQViolation: return "DriftAtQViolation";
    case ErrorKind::InfeasibleHyperplane: return "InfeasibleHyperplane";
    case ErrorKind::QuadrantEscape: return "QuadrantEscape";
    case ErrorKind::RateExplosion: return "RateExplosion";
    case ErrorKind::TooFewHits: return "TooFewHits";
    case ErrorKind::NoInfimum: return "NoInfimum";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ldb
