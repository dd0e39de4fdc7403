#include "emeforge/protocol.hpp"

#include <gtest/gtest.h>

#include <random>

#include "emeforge/codec.hpp"
#include "emeforge/identity.hpp"

namespace emeforge::protocol {
namespace {

struct PolicyRow {
  const char* name;
  Bytes key_prefix;
  void (*set)(LicensePolicy&);
};

// One row per policy field: the expected leading key bytes and a setter.
const std::vector<PolicyRow>& policy_rows() {
  static const std::vector<PolicyRow> rows = {
      {"can_play", {0x08}, [](LicensePolicy& p) { p.can_play = true; }},
      {"can_persist", {0x10}, [](LicensePolicy& p) { p.can_persist = true; }},
      {"can_renew", {0x18}, [](LicensePolicy& p) { p.can_renew = true; }},
      {"rental_duration_s", {0x20}, [](LicensePolicy& p) { p.rental_duration_s = 7200; }},
      {"playback_duration_s", {0x28}, [](LicensePolicy& p) { p.playback_duration_s = 3600; }},
      {"license_duration_s", {0x30}, [](LicensePolicy& p) { p.license_duration_s = 600; }},
      {"renewal_recovery_duration_s", {0x38},
       [](LicensePolicy& p) { p.renewal_recovery_duration_s = 30; }},
      {"renewal_server_url", {0x42},
       [](LicensePolicy& p) { p.renewal_server_url = "https://renew.example/r"; }},
      {"renewal_delay_s", {0x48}, [](LicensePolicy& p) { p.renewal_delay_s = 10; }},
      {"renewal_retry_interval_s", {0x50}, [](LicensePolicy& p) { p.renewal_retry_interval_s = 3; }},
      {"renew_with_usage", {0x58}, [](LicensePolicy& p) { p.renew_with_usage = true; }},
      {"always_include_client_id", {0x60},
       [](LicensePolicy& p) { p.always_include_client_id = true; }},
      {"soft_enforce_playback_duration", {0x70},
       [](LicensePolicy& p) { p.soft_enforce_playback_duration = true; }},
      {"soft_enforce_rental_duration", {0x78},
       [](LicensePolicy& p) { p.soft_enforce_rental_duration = true; }},
      {"watermarking_control", {0x80, 0x01}, [](LicensePolicy& p) { p.watermarking_control = 2; }},
  };
  return rows;
}

TEST(PolicyTest, EachFieldAloneHasItsCodePrefix) {
  ASSERT_EQ(policy_rows().size(), 15u);
  for (const auto& row : policy_rows()) {
    LicensePolicy p;
    row.set(p);
    Bytes enc = encode_policy(p);
    ASSERT_GE(enc.size(), row.key_prefix.size()) << row.name;
    EXPECT_TRUE(std::equal(row.key_prefix.begin(), row.key_prefix.end(), enc.begin())) << row.name;
    EXPECT_EQ(decode_policy(enc), p) << row.name;
  }
}

TEST(PolicyTest, AllFieldsSetYieldsAllPrefixesInOrder) {
  LicensePolicy p;
  for (const auto& row : policy_rows()) row.set(p);
  Bytes enc = encode_policy(p);
  auto fields = codec::decode_fields(enc);
  ASSERT_EQ(fields.size(), 15u);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    EXPECT_EQ(codec::encode_varint(fields[i].key.encoded()), policy_rows()[i].key_prefix)
        << policy_rows()[i].name;
  }
  EXPECT_EQ(decode_policy(enc), p);
}

TEST(PolicyTest, CanPlayOnlyStartsWith0801) {
  LicensePolicy p;
  p.can_play = true;
  EXPECT_EQ(encode_policy(p), (Bytes{0x08, 0x01}));
}

TEST(PolicyTest, EmptyPolicyIsEmptyBytes) { EXPECT_TRUE(encode_policy(LicensePolicy{}).empty()); }

TEST(PolicyTest, RenewalDelayAndAlwaysIncludeClientId) {
  LicensePolicy p;
  p.renewal_delay_s = 10;
  p.always_include_client_id = true;
  Bytes enc = encode_policy(p);
  EXPECT_TRUE(contains_subsequence(enc, Bytes{0x48, 0x0A}));
  EXPECT_TRUE(contains_subsequence(enc, Bytes{0x60, 0x01}));
}

TEST(PolicyTest, UnassignedFieldThirteenIsIgnoredOnDecode) {
  Bytes enc{0x08, 0x01, 0x68, 0x05};
  LicensePolicy p = decode_policy(enc);
  EXPECT_TRUE(p.can_play);
}

TEST(PolicyTest, DecodeErrors) {
  try {
    decode_policy(Bytes{0x42, 0x05, 0x61});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTruncated);
  }
  try {
    decode_policy(Bytes{0x0A, 0x01, 0x00});  // can_play sent as bytes
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKindMismatch);
  }
}

LicensePolicy random_policy(std::mt19937_64& gen) {
  LicensePolicy p;
  for (const auto& row : policy_rows()) {
    if (gen() % 2) row.set(p);
  }
  if (gen() % 2) p.renewal_delay_s = gen() % 100000;
  return p;
}

TEST(PolicyTest, RandomRoundTrip) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 500; ++i) {
    LicensePolicy p = random_policy(gen);
    EXPECT_EQ(decode_policy(encode_policy(p)), p);
  }
}

class MessageTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    identity::DeviceKeybox kb;
    kb.device_id.fill(1);
    kb.seed.fill(2);
    device_ = new identity::ProvisionedIdentity(
        identity::provision_mobile(kb, "org.example.app", identity::pixel7_client_info()));
  }
  static void TearDownTestSuite() { delete device_; }

  static const identity::ClientId& cid() { return device_->client_id; }

  static inline identity::ProvisionedIdentity* device_ = nullptr;
};

TEST_F(MessageTest, LicenseRequestClearRoundTrip) {
  LicenseRequest m{Bytes(16, 0x00), {Bytes(16, 0xAA)}, cid()};
  auto back = decode_license_request(encode_message(m));
  EXPECT_EQ(back, m);
  EXPECT_TRUE(is_clear(back.client_id));
}

TEST_F(MessageTest, LicenseRequestEncryptedVariantPreserved) {
  LicenseRequest m{Bytes(16, 0x01), {Bytes(16, 0xAA), Bytes(16, 0xBB)},
                   PrivacyEnvelope{Bytes(256, 3), Bytes(16, 4), Bytes(64, 5)}};
  auto back = decode_license_request(encode_message(m));
  EXPECT_EQ(back, m);
  EXPECT_FALSE(is_clear(back.client_id));
}

TEST_F(MessageTest, LicenseRequestInvariants) {
  LicenseRequest empty{Bytes(16, 0), {}, cid()};
  EXPECT_THROW(encode_message(empty), Error);
  LicenseRequest dup{Bytes(16, 0), {Bytes(16, 1), Bytes(16, 1)}, cid()};
  EXPECT_THROW(encode_message(dup), Error);

  codec::FieldWriter w;
  w.bytes(2, Bytes(16, 1)).bytes(3, cid().encode());
  try {
    decode_license_request(w.data());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingRequiredField);
  }
  codec::FieldWriter both;
  both.bytes(1, Bytes(16, 0)).bytes(2, Bytes(16, 1)).bytes(3, cid().encode()).bytes(
      4, PrivacyEnvelope{Bytes(1, 1), Bytes(16, 0), Bytes(16, 0)}.encode());
  try {
    decode_license_request(both.data());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvariantViolation);
  }
}

TEST_F(MessageTest, LicenseResponseTwoKeys) {
  LicensePolicy policy;
  policy.can_play = true;
  LicenseResponse m{Bytes(16, 9),
                    {WrappedKey{Bytes(16, 1), Bytes(256, 7), 3600},
                     WrappedKey{Bytes(16, 2), Bytes(256, 8), 3600}},
                    policy,
                    to_bytes("NESN")};
  auto back = decode_license_response(encode_message(m));
  ASSERT_EQ(back.keys.size(), 2u);
  EXPECT_EQ(back.keys[0].ttl_s, 3600u);
  EXPECT_EQ(back.keys[1].ttl_s, 3600u);
  EXPECT_EQ(back, m);
}

TEST_F(MessageTest, RenewalRequestPresenceInvariant) {
  LicensePolicy without;
  LicensePolicy with;
  with.always_include_client_id = true;
  EXPECT_NO_THROW(RenewalRequest(Bytes(16, 0), without, std::nullopt));
  EXPECT_NO_THROW(RenewalRequest(Bytes(16, 0), with, ClientIdPayload{cid()}));
  try {
    RenewalRequest(Bytes(16, 0), without, ClientIdPayload{cid()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvariantViolation);
  }
  EXPECT_THROW(RenewalRequest(Bytes(16, 0), with, std::nullopt), Error);

  // The same check applies to bytes arriving from the wire.
  codec::FieldWriter w;
  w.bytes(1, Bytes(16, 0)).bytes(6, encode_policy(without)).bytes(3, cid().encode());
  try {
    decode_renewal_request(w.data());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvariantViolation);
  }
}

TEST_F(MessageTest, RenewalRoundTrips) {
  LicensePolicy with;
  with.always_include_client_id = true;
  with.can_renew = true;
  RenewalRequest rr(Bytes(16, 5), with, ClientIdPayload{cid()});
  EXPECT_EQ(decode_renewal_request(encode_message(rr)), rr);

  RenewalResponse resp{Bytes(16, 5), {{Bytes(16, 1), 60}, {Bytes(16, 2), 0}}, with, std::nullopt};
  EXPECT_EQ(decode_renewal_response(encode_message(resp)), resp);
}

TEST_F(MessageTest, RandomizedRoundTripAllKinds) {
  std::mt19937_64 gen(11);
  auto rand_bytes = [&](std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(gen());
    return b;
  };
  for (int i = 0; i < 200; ++i) {
    LicensePolicy policy = random_policy(gen);
    ClientIdPayload payload = gen() % 2 ? ClientIdPayload{cid()}
                                        : ClientIdPayload{PrivacyEnvelope{
                                              rand_bytes(256), rand_bytes(16), rand_bytes(48)}};
    std::vector<Bytes> ids;
    for (std::size_t k = 0, n = 1 + gen() % 4; k < n; ++k) ids.push_back(rand_bytes(16));
    LicenseRequest lr{rand_bytes(16), ids, payload};
    ASSERT_EQ(decode_license_request(encode_message(lr)), lr);

    LicenseResponse resp{rand_bytes(16), {}, policy, std::nullopt};
    for (const auto& id : ids) resp.keys.push_back({id, rand_bytes(256), gen() % 10000});
    if (gen() % 2) resp.ott_field = rand_bytes(gen() % 80);
    ASSERT_EQ(decode_license_response(encode_message(resp)), resp);

    RenewalRequest rr(rand_bytes(16), policy,
                      policy.always_include_client_id ? std::optional(payload) : std::nullopt);
    ASSERT_EQ(decode_renewal_request(encode_message(rr)), rr);

    RenewalResponse rresp{rand_bytes(16), {}, policy, std::nullopt};
    for (const auto& id : ids) rresp.updated_ttls.push_back({id, gen() % 10000});
    ASSERT_EQ(decode_renewal_response(encode_message(rresp)), rresp);

    SignedMessage sm{message_kind_from_code(1 + gen() % 5), rand_bytes(gen() % 300),
                     rand_bytes(256)};
    ASSERT_EQ(SignedMessage::decode(sm.encode()), sm);
  }
}

TEST_F(MessageTest, SignVerifyAndExhaustiveBitFlips) {
  const auto& key = device_->private_key;
  Bytes body = to_bytes("LR-body!");
  SignedMessage sm = sign_message(MessageKind::kLicenseRequest, body, key);
  EXPECT_TRUE(verify_message(sm, key.public_key()));

  auto rng = crypto::DeterministicRandom::from_seed(77, "other");
  auto other = crypto::RsaPrivateKey::generate(rng);
  EXPECT_FALSE(verify_message(sm, other.public_key()));

  for (std::size_t i = 0; i < body.size() * 8; ++i) {
    SignedMessage flipped = sm;
    flipped.body[i / 8] ^= static_cast<std::uint8_t>(1u << (i % 8));
    EXPECT_FALSE(verify_message(flipped, key.public_key())) << "bit " << i;
  }
}

TEST(SignedMessageTest, UnknownKind) {
  codec::FieldWriter w;
  w.varint(1, 9).bytes(2, Bytes{1});
  try {
    SignedMessage::decode(w.data());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownKind);
  }
  EXPECT_THROW(parse_message_kind("LICENSE"), Error);
  EXPECT_EQ(parse_message_kind("RENEWAL_REQUEST"), MessageKind::kRenewalRequest);
  EXPECT_EQ(to_string(MessageKind::kServiceCertificate), "SERVICE_CERTIFICATE");
}

}  // namespace
}  // namespace emeforge::protocol
