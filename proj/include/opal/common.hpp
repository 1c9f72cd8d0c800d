#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace opal {

using Bytes = std::vector<std::uint8_t>;
using ItemId = std::uint64_t;
using LogicalTime = std::uint64_t;

enum class Errc {
  UnknownBucket,
  SizeMismatch,
  LengthMismatch,
  AuthFailure,
  BadTag,
  StaleState,
  CounterMismatch,
  ReplayDetected,
  Oversize,
  ConfigInvalid,
  IntegrityFailure,
  StashOverflow,
  DuplicateId,
  CannotMergeLast,
  MalformedMetadata,
  DomainError,
  SupercriticalConfig,
  EmptyCorpus,
  PadOverflow,
  ScriptRejected,
  Io,
};

const char* errc_name(Errc code);

/// Every failure the library reports carries one of the codes above; aborting
/// conditions (integrity, freshness) are never swallowed internally.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace opal
