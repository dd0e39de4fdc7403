#include "emeforge/codec.hpp"

namespace emeforge::codec {

void append_varint(Bytes& out, std::uint64_t value) {
  while (value >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(value | 0x80));
    value >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(value));
}

Bytes encode_varint(std::uint64_t value) {
  Bytes out;
  append_varint(out, value);
  return out;
}

VarintResult decode_varint(ByteView bytes) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i == kMaxVarintBytes) fail(ErrorCode::kOverflow, "varint longer than 10 bytes");
    std::uint64_t group = bytes[i] & 0x7f;
    // The tenth group may only contribute the single top bit.
    if (i == kMaxVarintBytes - 1 && group > 1) fail(ErrorCode::kOverflow, "varint exceeds 64 bits");
    value |= group << (7 * i);
    if ((bytes[i] & 0x80) == 0) return {value, i + 1};
  }
  fail(ErrorCode::kTruncated, "varint continuation bit set on last available byte");
}

void append_field(Bytes& out, const FieldKey& key, const FieldValue& value) {
  if (key.field_number == 0 || key.field_number > kMaxFieldNumber) {
    fail(ErrorCode::kMalformedField, "field number out of range");
  }
  bool is_varint = std::holds_alternative<std::uint64_t>(value);
  if (is_varint != (key.wire_kind == WireKind::kVarint)) {
    fail(ErrorCode::kKindMismatch, "value does not match wire kind of field " +
                                       std::to_string(key.field_number));
  }
  append_varint(out, key.encoded());
  if (is_varint) {
    append_varint(out, std::get<std::uint64_t>(value));
  } else {
    const auto& payload = std::get<Bytes>(value);
    append_varint(out, payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
  }
}

Bytes encode_field(const FieldKey& key, const FieldValue& value) {
  Bytes out;
  append_field(out, key, value);
  return out;
}

Bytes encode_fields(const std::vector<RawField>& fields) {
  Bytes out;
  for (const auto& f : fields) append_field(out, f.key, f.value);
  return out;
}

std::vector<RawField> decode_fields(ByteView bytes) {
  std::vector<RawField> fields;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto key = decode_varint(bytes.subspan(pos));
    pos += key.consumed;
    std::uint64_t kind = key.value & 0x07;
    std::uint64_t number = key.value >> 3;
    if (number == 0) fail(ErrorCode::kMalformedField, "field number 0");
    if (kind == 0) {
      auto v = decode_varint(bytes.subspan(pos));
      pos += v.consumed;
      fields.push_back({{number, WireKind::kVarint}, v.value});
    } else if (kind == 2) {
      auto len = decode_varint(bytes.subspan(pos));
      pos += len.consumed;
      if (len.value > bytes.size() - pos) {
        fail(ErrorCode::kTruncated, "length-delimited field " + std::to_string(number) +
                                        " declares " + std::to_string(len.value) + " bytes");
      }
      auto start = bytes.begin() + static_cast<std::ptrdiff_t>(pos);
      fields.push_back({{number, WireKind::kLengthDelimited},
                        Bytes(start, start + static_cast<std::ptrdiff_t>(len.value))});
      pos += len.value;
    } else {
      fail(ErrorCode::kKindUnsupported, "wire kind " + std::to_string(kind));
    }
  }
  return fields;
}

FieldWriter& FieldWriter::varint(std::uint64_t field, std::uint64_t value) {
  append_field(out_, {field, WireKind::kVarint}, value);
  return *this;
}

FieldWriter& FieldWriter::boolean(std::uint64_t field, bool value) {
  return varint(field, value ? 1 : 0);
}

FieldWriter& FieldWriter::bytes(std::uint64_t field, ByteView value) {
  append_field(out_, {field, WireKind::kLengthDelimited}, Bytes(value.begin(), value.end()));
  return *this;
}

FieldWriter& FieldWriter::text(std::uint64_t field, std::string_view value) {
  return bytes(field, ByteView(reinterpret_cast<const std::uint8_t*>(value.data()), value.size()));
}

FieldWriter& FieldWriter::varint_if(std::uint64_t field, std::uint64_t value) {
  return value != 0 ? varint(field, value) : *this;
}

FieldWriter& FieldWriter::boolean_if(std::uint64_t field, bool value) {
  return value ? boolean(field, true) : *this;
}

FieldWriter& FieldWriter::text_if(std::uint64_t field, const std::optional<std::string>& value) {
  return value ? text(field, *value) : *this;
}

FieldReader::FieldReader(ByteView bytes) : fields_(decode_fields(bytes)) {}

const RawField* FieldReader::last(std::uint64_t field) const {
  const RawField* found = nullptr;
  for (const auto& f : fields_) {
    if (f.key.field_number == field) found = &f;
  }
  return found;
}

bool FieldReader::has(std::uint64_t field) const { return last(field) != nullptr; }

std::optional<std::uint64_t> FieldReader::varint(std::uint64_t field) const {
  const auto* f = last(field);
  if (!f) return std::nullopt;
  if (f->key.wire_kind != WireKind::kVarint) {
    fail(ErrorCode::kKindMismatch, "field " + std::to_string(field) + " expected varint");
  }
  return std::get<std::uint64_t>(f->value);
}

std::optional<Bytes> FieldReader::bytes(std::uint64_t field) const {
  const auto* f = last(field);
  if (!f) return std::nullopt;
  if (f->key.wire_kind != WireKind::kLengthDelimited) {
    fail(ErrorCode::kKindMismatch, "field " + std::to_string(field) + " expected length-delimited");
  }
  return std::get<Bytes>(f->value);
}

std::optional<std::string> FieldReader::text(std::uint64_t field) const {
  auto b = bytes(field);
  if (!b) return std::nullopt;
  return to_text(*b);
}

std::vector<Bytes> FieldReader::repeated_bytes(std::uint64_t field) const {
  std::vector<Bytes> out;
  for (const auto& f : fields_) {
    if (f.key.field_number != field) continue;
    if (f.key.wire_kind != WireKind::kLengthDelimited) {
      fail(ErrorCode::kKindMismatch, "field " + std::to_string(field) + " expected length-delimited");
    }
    out.push_back(std::get<Bytes>(f.value));
  }
  return out;
}

Bytes FieldReader::required_bytes(std::uint64_t field, std::string_view name) const {
  auto b = bytes(field);
  if (!b) fail(ErrorCode::kMissingRequiredField, std::string(name));
  return *b;
}

std::string FieldReader::required_text(std::uint64_t field, std::string_view name) const {
  return to_text(required_bytes(field, name));
}

}  // namespace emeforge::codec
