#include "emeforge/crypto.hpp"

#include <gtest/gtest.h>

#include <chrono>

namespace emeforge::crypto {
namespace {

TEST(DeterministicRandomTest, SameKeySameStream) {
  auto a = DeterministicRandom::from_seed(1, "x");
  auto b = DeterministicRandom::from_seed(1, "x");
  auto c = DeterministicRandom::from_seed(2, "x");
  Bytes ab = a.bytes(100);
  EXPECT_EQ(ab, b.bytes(100));
  EXPECT_NE(ab, c.bytes(100));
}

TEST(DeterministicRandomTest, ChunkingDoesNotChangeStream) {
  auto a = DeterministicRandom::from_seed(9);
  auto b = DeterministicRandom::from_seed(9);
  Bytes whole = a.bytes(77);
  Bytes parts;
  for (std::size_t n : {1, 31, 2, 40, 3}) {
    Bytes p = b.bytes(n);
    parts.insert(parts.end(), p.begin(), p.end());
  }
  EXPECT_EQ(whole, parts);
}

TEST(Sha256Test, KnownVector) {
  EXPECT_EQ(to_hex(sha256(to_bytes("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(HmacTest, Rfc4231Case2) {
  EXPECT_EQ(to_hex(hmac_sha256(to_bytes("Jefe"), to_bytes("what do ya want for nothing?"))),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(AesCbcTest, Sp80038aVector) {
  // NIST SP 800-38A F.2.1, first block.
  Bytes key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
  Bytes iv = from_hex("000102030405060708090a0b0c0d0e0f");
  Bytes pt = from_hex("6bc1bee22e409f96e93d7e117393172a");
  Bytes ct = aes_cbc_encrypt(key, iv, pt, Padding::kNone);
  EXPECT_EQ(to_hex(ct), "7649abac8119b246cee98e9b12e9197d");
  EXPECT_EQ(aes_cbc_decrypt(key, iv, ct, Padding::kNone), pt);
}

TEST(AesCbcTest, Pkcs7PaddingRoundTripAndFailure) {
  Bytes key(16, 1), iv(16, 2);
  for (std::size_t n : {0, 1, 15, 16, 17, 100}) {
    Bytes pt(n, 0x5a);
    Bytes ct = aes_cbc_encrypt(key, iv, pt, Padding::kPkcs7);
    EXPECT_EQ(ct.size() % 16, 0u);
    EXPECT_GT(ct.size(), n);
    EXPECT_EQ(aes_cbc_decrypt(key, iv, ct, Padding::kPkcs7), pt);
  }
  Bytes wrong_key(16, 3);
  Bytes ct = aes_cbc_encrypt(key, iv, Bytes(20, 1), Padding::kPkcs7);
  // A wrong key yields garbage whose padding almost never checks out; try a
  // few keys so the assertion is not a coin flip.
  int failures = 0;
  for (int i = 0; i < 8; ++i) {
    wrong_key[0] = static_cast<std::uint8_t>(i + 10);
    try {
      aes_cbc_decrypt(wrong_key, iv, ct, Padding::kPkcs7);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDecryptFailed);
      ++failures;
    }
  }
  EXPECT_GE(failures, 6);
  EXPECT_THROW(aes_cbc_decrypt(key, iv, Bytes(15, 0), Padding::kPkcs7), Error);
}

class RsaTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto rng = DeterministicRandom::from_seed(123, "rsa-test");
    key_ = new RsaPrivateKey(RsaPrivateKey::generate(rng));
    auto rng2 = DeterministicRandom::from_seed(124, "rsa-test");
    other_ = new RsaPrivateKey(RsaPrivateKey::generate(rng2));
  }
  static void TearDownTestSuite() {
    delete key_;
    delete other_;
  }
  static RsaPrivateKey* key_;
  static RsaPrivateKey* other_;
};
RsaPrivateKey* RsaTest::key_ = nullptr;
RsaPrivateKey* RsaTest::other_ = nullptr;

TEST_F(RsaTest, ModulusIs2048Bits) {
  EXPECT_EQ(key_->public_key().modulus().size(), 256u);
  EXPECT_GE(key_->public_key().modulus()[0], 0x80);
  EXPECT_EQ(key_->public_key().exponent(), (Bytes{0x01, 0x00, 0x01}));
}

TEST_F(RsaTest, GenerationIsDeterministic) {
  auto rng = DeterministicRandom::from_seed(123, "rsa-test");
  auto again = RsaPrivateKey::generate(rng);
  EXPECT_EQ(again.public_key(), key_->public_key());
  EXPECT_FALSE(again.public_key() == other_->public_key());
}

TEST_F(RsaTest, SignVerify) {
  Bytes msg = to_bytes("license request body");
  Bytes sig = key_->sign(msg);
  EXPECT_EQ(sig, key_->sign(msg));  // PKCS#1 v1.5 is deterministic
  EXPECT_TRUE(key_->public_key().verify(msg, sig));
  EXPECT_FALSE(other_->public_key().verify(msg, sig));
  msg[0] ^= 1;
  EXPECT_FALSE(key_->public_key().verify(msg, sig));
}

// The encoder is ours, the decoder is OpenSSL's: agreement checks both.
TEST_F(RsaTest, OaepRoundTripThroughOpenSslDecoder) {
  auto rng = DeterministicRandom::from_seed(5);
  for (std::size_t n : {0, 1, 16, 190}) {
    Bytes pt = rng.bytes(n);
    Bytes ct = key_->public_key().encrypt_oaep(pt, rng);
    EXPECT_EQ(ct.size(), 256u);
    EXPECT_EQ(key_->decrypt_oaep(ct), pt);
  }
  Bytes ct = key_->public_key().encrypt_oaep(Bytes(16, 7), rng);
  try {
    other_->decrypt_oaep(ct);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDecryptFailed);
  }
}

TEST_F(RsaTest, OaepIsRandomized) {
  auto rng = DeterministicRandom::from_seed(6);
  Bytes pt(16, 1);
  EXPECT_NE(key_->public_key().encrypt_oaep(pt, rng), key_->public_key().encrypt_oaep(pt, rng));
}

TEST(RsaKeygenTest, AverageTimeIsBounded) {
  // Budget check for bulk provisioning: 20 keys well under a second each.
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 20; ++i) {
    auto rng = DeterministicRandom::from_seed(1000 + i, "bench");
    auto k = RsaPrivateKey::generate(rng);
    ASSERT_EQ(k.public_key().modulus().size(), 256u);
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  std::printf("20 deterministic RSA-2048 keys in %lld ms\n", static_cast<long long>(ms));
  EXPECT_LT(ms, 20 * 1000);
}

}  // namespace
}  // namespace emeforge::crypto
