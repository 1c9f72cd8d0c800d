#include "opal/codec.hpp"

namespace opal {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::UnknownBucket: return "UnknownBucket";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::BadTag: return "BadTag";
    case Errc::StaleState: return "StaleState";
    case Errc::CounterMismatch: return "CounterMismatch";
    case Errc::ReplayDetected: return "ReplayDetected";
    case Errc::Oversize: return "Oversize";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IntegrityFailure: return "IntegrityFailure";
    case Errc::StashOverflow: return "StashOverflow";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::CannotMergeLast: return "CannotMergeLast";
    case Errc::MalformedMetadata: return "MalformedMetadata";
    case Errc::DomainError: return "DomainError";
    case Errc::SupercriticalConfig: return "SupercriticalConfig";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::PadOverflow: return "PadOverflow";
    case Errc::ScriptRejected: return "ScriptRejected";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace opal
