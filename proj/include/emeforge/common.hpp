#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace emeforge {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Seconds on the caller-supplied simulation clock. Nothing in the core reads
// the wall clock.
using VirtualTime = std::uint64_t;

enum class ErrorCode {
  // codec
  kTruncated,
  kOverflow,
  kKindMismatch,
  kKindUnsupported,
  kMalformedField,
  // protocol
  kMissingRequiredField,
  kInvariantViolation,
  kUnknownKind,
  // identity / privacy
  kProfileMismatch,
  kCertificateUnverified,
  kDecryptFailed,
  kDecodeFailed,
  // cdm
  kNoServerCertificate,
  kBadState,
  kRequestIdMismatch,
  kSignatureInvalid,
  kPolicyForbids,
  kBlobCorrupt,
  kAllKeysExpired,
  kKeyNotFound,
  kKeyExpired,
  kPlatformForbids,
  kSessionNotFound,
  // license server
  kUnknownKeyId,
  kChainInvalid,
  kUnknownRequestId,
  kPolicyViolated,
  kUnknownPolicyKey,
  kBadValue,
  // user agent
  kEmeUnsupported,
  kPermissionDenied,
  kNotFound,
  kUnknownProfile,
  // audit
  kTraceCorrupt,
  kNesnMalformed,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

std::string base64_encode(ByteView data);
// Throws Error(kDecodeFailed) on malformed input.
Bytes base64_decode(std::string_view text);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_text(ByteView b) { return std::string(b.begin(), b.end()); }

// True iff `needle` occurs as a contiguous run inside `haystack`.
bool contains_subsequence(ByteView haystack, ByteView needle);

}  // namespace emeforge
