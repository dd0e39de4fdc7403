#pragma once

// Base-128 varint key/value wire encoding shared by every message type.
//
// A field is `varint((field_number << 3) | wire_kind)` followed by either a
// varint payload (kind 0) or a varint length and that many bytes (kind 2).
// With this scheme a policy field numbered n <= 15 encodes its key as the
// single byte n << 3, which is exactly the code column of the license policy
// table (0x08 can_play ... 0x78 soft_enforce_rental_duration). Field 16
// (watermarking control) needs the two-byte key 0x80 0x01.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emeforge/common.hpp"

namespace emeforge::codec {

enum class WireKind : std::uint8_t {
  kVarint = 0,
  kLengthDelimited = 2,
};

struct FieldKey {
  std::uint64_t field_number = 1;
  WireKind wire_kind = WireKind::kVarint;

  std::uint64_t encoded() const {
    return (field_number << 3) | static_cast<std::uint64_t>(wire_kind);
  }
  friend bool operator==(const FieldKey&, const FieldKey&) = default;
};

using FieldValue = std::variant<std::uint64_t, Bytes>;

struct RawField {
  FieldKey key;
  FieldValue value;

  friend bool operator==(const RawField&, const RawField&) = default;
};

struct VarintResult {
  std::uint64_t value = 0;
  std::size_t consumed = 0;
};

// Largest field number whose key still fits in 64 bits.
inline constexpr std::uint64_t kMaxFieldNumber = (std::uint64_t{1} << 61) - 1;
// A 64-bit value never needs more than ten base-128 groups.
inline constexpr std::size_t kMaxVarintBytes = 10;

Bytes encode_varint(std::uint64_t value);
void append_varint(Bytes& out, std::uint64_t value);
VarintResult decode_varint(ByteView bytes);

Bytes encode_field(const FieldKey& key, const FieldValue& value);
void append_field(Bytes& out, const FieldKey& key, const FieldValue& value);
Bytes encode_fields(const std::vector<RawField>& fields);
std::vector<RawField> decode_fields(ByteView bytes);

// Builder used by message serializers. Fields are appended in call order.
class FieldWriter {
 public:
  FieldWriter& varint(std::uint64_t field, std::uint64_t value);
  FieldWriter& boolean(std::uint64_t field, bool value);
  FieldWriter& bytes(std::uint64_t field, ByteView value);
  FieldWriter& text(std::uint64_t field, std::string_view value);

  // Skip unset (zero/false/empty) values.
  FieldWriter& varint_if(std::uint64_t field, std::uint64_t value);
  FieldWriter& boolean_if(std::uint64_t field, bool value);
  FieldWriter& text_if(std::uint64_t field, const std::optional<std::string>& value);

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

// Read-side companion: decodes once and indexes fields by number. Accessors
// throw kKindMismatch when a field arrives with the wrong wire kind.
class FieldReader {
 public:
  explicit FieldReader(ByteView bytes);

  bool has(std::uint64_t field) const;
  std::optional<std::uint64_t> varint(std::uint64_t field) const;
  std::optional<Bytes> bytes(std::uint64_t field) const;
  std::optional<std::string> text(std::uint64_t field) const;
  std::vector<Bytes> repeated_bytes(std::uint64_t field) const;
  bool boolean(std::uint64_t field) const { return varint(field).value_or(0) != 0; }

  Bytes required_bytes(std::uint64_t field, std::string_view name) const;
  std::string required_text(std::uint64_t field, std::string_view name) const;

  const std::vector<RawField>& fields() const { return fields_; }

 private:
  const RawField* last(std::uint64_t field) const;

  std::vector<RawField> fields_;
};

}  // namespace emeforge::codec
