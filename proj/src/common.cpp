#include "emeforge/common.hpp"

#include <openssl/evp.h>

#include <algorithm>

namespace emeforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kKindUnsupported: return "KindUnsupported";
    case ErrorCode::kMalformedField: return "MalformedField";
    case ErrorCode::kMissingRequiredField: return "MissingRequiredField";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kUnknownKind: return "UnknownKind";
    case ErrorCode::kProfileMismatch: return "ProfileMismatch";
    case ErrorCode::kCertificateUnverified: return "CertificateUnverified";
    case ErrorCode::kDecryptFailed: return "DecryptFailed";
    case ErrorCode::kDecodeFailed: return "DecodeFailed";
    case ErrorCode::kNoServerCertificate: return "NoServerCertificate";
    case ErrorCode::kBadState: return "BadState";
    case ErrorCode::kRequestIdMismatch: return "RequestIdMismatch";
    case ErrorCode::kSignatureInvalid: return "SignatureInvalid";
    case ErrorCode::kPolicyForbids: return "PolicyForbids";
    case ErrorCode::kBlobCorrupt: return "BlobCorrupt";
    case ErrorCode::kAllKeysExpired: return "AllKeysExpired";
    case ErrorCode::kKeyNotFound: return "KeyNotFound";
    case ErrorCode::kKeyExpired: return "KeyExpired";
    case ErrorCode::kPlatformForbids: return "PlatformForbids";
    case ErrorCode::kSessionNotFound: return "SessionNotFound";
    case ErrorCode::kUnknownKeyId: return "UnknownKeyId";
    case ErrorCode::kChainInvalid: return "ChainInvalid";
    case ErrorCode::kUnknownRequestId: return "UnknownRequestId";
    case ErrorCode::kPolicyViolated: return "PolicyViolated";
    case ErrorCode::kUnknownPolicyKey: return "UnknownPolicyKey";
    case ErrorCode::kBadValue: return "BadValue";
    case ErrorCode::kEmeUnsupported: return "EmeUnsupported";
    case ErrorCode::kPermissionDenied: return "PermissionDenied";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnknownProfile: return "UnknownProfile";
    case ErrorCode::kTraceCorrupt: return "TraceCorrupt";
    case ErrorCode::kNesnMalformed: return "NesnMalformed";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) fail(ErrorCode::kDecodeFailed, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(ErrorCode::kDecodeFailed, "non-hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

std::string base64_encode(ByteView data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) fail(ErrorCode::kDecodeFailed, "base64 length not a multiple of 4");
  for (char c : text) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
              c == '+' || c == '/' || c == '=';
    if (!ok) fail(ErrorCode::kDecodeFailed, "invalid base64 character");
  }
  Bytes out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) fail(ErrorCode::kDecodeFailed, "invalid base64");
  // EVP_DecodeBlock keeps the zero bytes standing in for '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

bool contains_subsequence(ByteView haystack, ByteView needle) {
  if (needle.empty()) return true;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace emeforge
