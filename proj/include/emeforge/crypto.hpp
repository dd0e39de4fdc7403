#pragma once

// Thin RAII layer over OpenSSL: hashing, AES-CBC, RSA keys, and the
// randomness sources threaded through the simulation.

#include <cstdint>
#include <memory>
#include <span>

#include "emeforge/common.hpp"

typedef struct evp_pkey_st EVP_PKEY;

namespace emeforge::crypto {

inline constexpr std::size_t kAesKeySize = 16;
inline constexpr std::size_t kAesBlockSize = 16;
inline constexpr int kRsaBits = 2048;

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes bytes(std::size_t n);
  std::uint64_t next_u64();
  // Uniform in [0, bound). bound must be non-zero.
  std::uint64_t uniform(std::uint64_t bound);
};

// HMAC-SHA256 in counter mode keyed by `key`. The output stream is a pure
// function of the key, which is what makes provisioning and every `--seed`
// run reproducible.
class DeterministicRandom final : public RandomSource {
 public:
  explicit DeterministicRandom(ByteView key);
  static DeterministicRandom from_seed(std::uint64_t seed, std::string_view label = "");

  void fill(std::span<std::uint8_t> out) override;

 private:
  Bytes key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint8_t, 32> block_{};
  std::size_t used_ = 32;
};

class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

Bytes sha256(ByteView data);
Bytes hmac_sha256(ByteView key, ByteView data);

enum class Padding { kNone, kPkcs7 };

Bytes aes_cbc_encrypt(ByteView key, ByteView iv, ByteView plaintext, Padding padding);
// Throws kDecryptFailed on bad padding or a ciphertext that is not a whole
// number of blocks.
Bytes aes_cbc_decrypt(ByteView key, ByteView iv, ByteView ciphertext, Padding padding);

class RsaPublicKey {
 public:
  RsaPublicKey() = default;
  RsaPublicKey(Bytes modulus, Bytes exponent);

  const Bytes& modulus() const { return modulus_; }
  const Bytes& exponent() const { return exponent_; }
  bool empty() const { return modulus_.empty(); }
  std::size_t size_bytes() const { return modulus_.size(); }

  // RSASSA-PKCS1-v1_5 with SHA-256.
  bool verify(ByteView data, ByteView signature) const;
  // RSAES-OAEP with SHA-256 and MGF1-SHA256; the OAEP seed is drawn from `rng`.
  Bytes encrypt_oaep(ByteView plaintext, RandomSource& rng) const;

  friend bool operator==(const RsaPublicKey& a, const RsaPublicKey& b) {
    return a.modulus_ == b.modulus_ && a.exponent_ == b.exponent_;
  }

 private:
  EVP_PKEY* handle() const;

  Bytes modulus_;
  Bytes exponent_;
  mutable std::shared_ptr<EVP_PKEY> pkey_;
};

class RsaPrivateKey {
 public:
  RsaPrivateKey() = default;

  // Deterministic keypair: primes are searched from candidates drawn off `rng`.
  static RsaPrivateKey generate(RandomSource& rng, int bits = kRsaBits);

  bool empty() const { return !pkey_; }
  const RsaPublicKey& public_key() const { return public_key_; }

  // Deterministic RSASSA-PKCS1-v1_5 / SHA-256 signature.
  Bytes sign(ByteView data) const;
  // Throws kDecryptFailed when the OAEP block does not decode.
  Bytes decrypt_oaep(ByteView ciphertext) const;

 private:
  std::shared_ptr<EVP_PKEY> pkey_;
  RsaPublicKey public_key_;
};

// Exposed for tests: the OAEP encoding step, independent of OpenSSL's.
Bytes oaep_encode_sha256(ByteView message, std::size_t modulus_bytes, ByteView seed);

}  // namespace emeforge::crypto
