#include "emeforge/codec.hpp"

#include <gtest/gtest.h>

#include <random>

namespace emeforge::codec {
namespace {

// Independent reference: interpret bytes as little-endian base-128 digits with
// 128-bit arithmetic, stopping at the first byte without the high bit.
struct OracleResult {
  unsigned __int128 value = 0;
  std::size_t consumed = 0;
  bool terminated = false;
};

OracleResult oracle_decode(const Bytes& bytes) {
  OracleResult r;
  unsigned __int128 weight = 1;
  for (auto b : bytes) {
    r.value += static_cast<unsigned __int128>(b & 0x7f) * weight;
    weight *= 128;
    ++r.consumed;
    if ((b & 0x80) == 0) {
      r.terminated = true;
      break;
    }
  }
  return r;
}

// Enumerate byte strings of a given length in base-128 with continuation bits
// until the value matches; yields the shortest encoding of v.
Bytes oracle_encode(std::uint64_t v) {
  for (std::size_t len = 1; len <= 10; ++len) {
    Bytes out;
    unsigned __int128 rest = v;
    for (std::size_t i = 0; i < len; ++i) {
      auto digit = static_cast<std::uint8_t>(rest % 128);
      rest /= 128;
      out.push_back(static_cast<std::uint8_t>(digit | (i + 1 < len ? 0x80 : 0)));
    }
    if (rest == 0) return out;
  }
  return {};
}

TEST(VarintTest, EncodesZeroAndSingleByte) {
  EXPECT_EQ(encode_varint(0), (Bytes{0x00}));
  EXPECT_EQ(encode_varint(8), (Bytes{0x08}));
  EXPECT_EQ(encode_varint(127), (Bytes{0x7f}));
}

TEST(VarintTest, EncodesThreeHundredAsOracleDoes) {
  // Frozen from oracle_encode(300).
  const Bytes expected{0xAC, 0x02};
  ASSERT_EQ(oracle_encode(300), expected);
  EXPECT_EQ(encode_varint(300), expected);
  auto o = oracle_decode(expected);
  EXPECT_EQ(static_cast<std::uint64_t>(o.value), 300u);
}

TEST(VarintTest, DecodesWithConsumedCount) {
  auto r = decode_varint(Bytes{0x00});
  EXPECT_EQ(r.value, 0u);
  EXPECT_EQ(r.consumed, 1u);

  r = decode_varint(Bytes{0xAC, 0x02, 0xFF});
  EXPECT_EQ(r.value, 300u);
  EXPECT_EQ(r.consumed, 2u);
}

TEST(VarintTest, LoneContinuationByteIsTruncated) {
  try {
    decode_varint(Bytes{0x80});
    FAIL() << "expected Truncated";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncated);
  }
}

TEST(VarintTest, OverflowBeyondSixtyFourBits) {
  Bytes max = encode_varint(UINT64_MAX);
  EXPECT_EQ(max.size(), 10u);
  EXPECT_EQ(decode_varint(max).value, UINT64_MAX);

  Bytes too_big(9, 0xff);
  too_big.push_back(0x02);  // 2^64
  try {
    decode_varint(too_big);
    FAIL() << "expected Overflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOverflow);
  }

  Bytes too_long(10, 0x80);
  too_long.push_back(0x00);
  EXPECT_THROW(decode_varint(too_long), Error);
}

TEST(VarintTest, MatchesOracleOnRandomValues) {
  std::mt19937_64 gen(42);
  for (int i = 0; i < 5000; ++i) {
    std::uint64_t v = gen() >> (gen() % 64);
    Bytes enc = encode_varint(v);
    ASSERT_EQ(enc, oracle_encode(v)) << v;
    auto o = oracle_decode(enc);
    ASSERT_TRUE(o.terminated);
    ASSERT_EQ(static_cast<std::uint64_t>(o.value), v);
    auto r = decode_varint(enc);
    ASSERT_EQ(r.value, v);
    ASSERT_EQ(r.consumed, enc.size());
  }
}

TEST(FieldTest, PolicyCodeBytes) {
  EXPECT_EQ(encode_field({2, WireKind::kVarint}, std::uint64_t{1}), (Bytes{0x10, 0x01}));
  EXPECT_EQ(encode_field({8, WireKind::kLengthDelimited}, to_bytes("a")),
            (Bytes{0x42, 0x01, 0x61}));
}

TEST(FieldTest, FieldSixteenNeedsTwoByteKey) {
  // (16 << 3) = 128, whose minimal varint is the oracle's two-byte form.
  ASSERT_EQ(oracle_encode(128), (Bytes{0x80, 0x01}));
  EXPECT_EQ(encode_field({16, WireKind::kVarint}, std::uint64_t{0}), (Bytes{0x80, 0x01, 0x00}));
}

TEST(FieldTest, SingleByteKeysForLowFieldNumbers) {
  for (std::uint64_t n = 1; n <= 15; ++n) {
    Bytes enc = encode_field({n, WireKind::kVarint}, std::uint64_t{1});
    EXPECT_EQ(enc[0], static_cast<std::uint8_t>(n << 3)) << n;
  }
}

TEST(FieldTest, KindMismatchAndBadFieldNumber) {
  try {
    encode_field({1, WireKind::kVarint}, Bytes{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKindMismatch);
  }
  EXPECT_THROW(encode_field({0, WireKind::kVarint}, std::uint64_t{1}), Error);
}

TEST(DecodeFieldsTest, EmptyInput) { EXPECT_TRUE(decode_fields(Bytes{}).empty()); }

TEST(DecodeFieldsTest, TwoPolicyFlags) {
  auto fields = decode_fields(Bytes{0x08, 0x01, 0x10, 0x01});
  ASSERT_EQ(fields.size(), 2u);
  EXPECT_EQ(fields[0], (RawField{{1, WireKind::kVarint}, std::uint64_t{1}}));
  EXPECT_EQ(fields[1], (RawField{{2, WireKind::kVarint}, std::uint64_t{1}}));
}

TEST(DecodeFieldsTest, DeclaredLengthBeyondInputIsTruncated) {
  try {
    decode_fields(Bytes{0x42, 0x02, 0x61});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncated);
  }
}

TEST(DecodeFieldsTest, UnsupportedWireKinds) {
  for (std::uint8_t kind : {1, 3, 4, 5, 6, 7}) {
    try {
      decode_fields(Bytes{static_cast<std::uint8_t>(0x08 | kind), 0x00});
      FAIL() << int(kind);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kKindUnsupported);
    }
  }
}

TEST(DecodeFieldsTest, UnknownFieldThirteenPreserved) {
  Bytes in{0x68, 0x05};
  auto fields = decode_fields(in);
  ASSERT_EQ(fields.size(), 1u);
  EXPECT_EQ(fields[0].key.field_number, 13u);
  EXPECT_EQ(encode_fields(fields), in);
}

// Property: decode(encode(L)) == L and the re-encoding is byte-identical.
TEST(DecodeFieldsTest, RoundTripProperty) {
  std::mt19937_64 gen(7);
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<RawField> fields;
    auto count = gen() % 12;
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t number = 1 + gen() % ((gen() % 4 == 0) ? 100000 : 20);
      if (gen() % 2) {
        fields.push_back({{number, WireKind::kVarint}, gen() >> (gen() % 64)});
      } else {
        Bytes payload(gen() % 300);
        for (auto& b : payload) b = static_cast<std::uint8_t>(gen());
        fields.push_back({{number, WireKind::kLengthDelimited}, payload});
      }
    }
    Bytes enc = encode_fields(fields);
    ASSERT_EQ(decode_fields(enc), fields);
  }
}

// Property: any strict prefix of a valid encoding either decodes to fewer
// fields or fails with Truncated; decode never reads past the input.
TEST(DecodeFieldsTest, PrefixesNeverOverread) {
  std::vector<RawField> fields{{{1, WireKind::kVarint}, std::uint64_t{300}},
                               {{8, WireKind::kLengthDelimited}, to_bytes("https://x")},
                               {{16, WireKind::kVarint}, std::uint64_t{2}}};
  Bytes enc = encode_fields(fields);
  for (std::size_t cut = 0; cut < enc.size(); ++cut) {
    Bytes prefix(enc.begin(), enc.begin() + static_cast<std::ptrdiff_t>(cut));
    try {
      auto got = decode_fields(prefix);
      EXPECT_EQ(encode_fields(got), prefix);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kTruncated) << cut;
    }
  }
}

TEST(FieldReaderTest, LastValueWinsAndKindIsChecked) {
  FieldWriter w;
  w.varint(1, 5).varint(1, 6).text(2, "hi").bytes(3, Bytes{1}).bytes(3, Bytes{2});
  FieldReader r(w.data());
  EXPECT_EQ(r.varint(1), 6u);
  EXPECT_EQ(r.text(2), "hi");
  EXPECT_EQ(r.repeated_bytes(3).size(), 2u);
  EXPECT_FALSE(r.has(4));
  EXPECT_THROW(r.bytes(1), Error);
  EXPECT_THROW(r.required_bytes(9, "nine"), Error);
}

}  // namespace
}  // namespace emeforge::codec
