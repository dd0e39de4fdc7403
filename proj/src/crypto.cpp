#include "emeforge/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/param_build.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstring>

namespace emeforge::crypto {
namespace {

struct BnDeleter {
  void operator()(BIGNUM* bn) const { BN_clear_free(bn); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* ctx) const { BN_CTX_free(ctx); }
};
struct MontDeleter {
  void operator()(BN_MONT_CTX* m) const { BN_MONT_CTX_free(m); }
};
struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* ctx) const { EVP_PKEY_CTX_free(ctx); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
struct ParamBldDeleter {
  void operator()(OSSL_PARAM_BLD* b) const { OSSL_PARAM_BLD_free(b); }
};
struct ParamDeleter {
  void operator()(OSSL_PARAM* p) const { OSSL_PARAM_free(p); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using MontPtr = std::unique_ptr<BN_MONT_CTX, MontDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

BnPtr new_bn() {
  BnPtr bn(BN_new());
  if (!bn) throw std::bad_alloc();
  return bn;
}

BnPtr bn_from_bytes(ByteView b) {
  BnPtr bn(BN_bin2bn(b.data(), static_cast<int>(b.size()), nullptr));
  if (!bn) throw std::bad_alloc();
  return bn;
}

Bytes bn_to_bytes(const BIGNUM* bn) {
  Bytes out(static_cast<std::size_t>(BN_num_bytes(bn)));
  BN_bn2bin(bn, out.data());
  return out;
}

void check(int ok, const char* what) {
  if (ok <= 0) throw std::runtime_error(std::string("openssl: ") + what);
}

std::shared_ptr<EVP_PKEY> pkey_from_params(OSSL_PARAM_BLD* bld, int selection) {
  std::unique_ptr<OSSL_PARAM, ParamDeleter> params(OSSL_PARAM_BLD_to_param(bld));
  check(params != nullptr, "OSSL_PARAM_BLD_to_param");
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr));
  check(ctx != nullptr, "EVP_PKEY_CTX_new_from_name");
  check(EVP_PKEY_fromdata_init(ctx.get()), "EVP_PKEY_fromdata_init");
  EVP_PKEY* raw = nullptr;
  check(EVP_PKEY_fromdata(ctx.get(), &raw, selection, params.get()), "EVP_PKEY_fromdata");
  return std::shared_ptr<EVP_PKEY>(raw, EVP_PKEY_free);
}

// Odd primes below 2^17 used to sieve prime candidates before any modular
// exponentiation.
const std::vector<BN_ULONG>& small_primes() {
  static const std::vector<BN_ULONG> primes = [] {
    constexpr std::size_t kLimit = 1 << 17;
    std::vector<bool> composite(kLimit, false);
    std::vector<BN_ULONG> out;
    for (std::size_t i = 3; i < kLimit; i += 2) {
      if (composite[i]) continue;
      out.push_back(static_cast<BN_ULONG>(i));
      for (std::size_t j = i * i; j < kLimit; j += 2 * i) composite[j] = true;
    }
    return out;
  }();
  return primes;
}

// Miller-Rabin with base 2 followed by `extra_rounds` bases drawn from rng.
bool miller_rabin(const BIGNUM* n, int extra_rounds, RandomSource& rng, BN_CTX* ctx) {
  MontPtr mont(BN_MONT_CTX_new());
  check(BN_MONT_CTX_set(mont.get(), n, ctx), "BN_MONT_CTX_set");

  BnPtr n_minus_1 = new_bn();
  check(BN_sub(n_minus_1.get(), n, BN_value_one()), "BN_sub");
  int s = 0;
  while (!BN_is_bit_set(n_minus_1.get(), s)) ++s;
  BnPtr d = new_bn();
  check(BN_rshift(d.get(), n_minus_1.get(), s), "BN_rshift");
  // Montgomery form of n-1, so the squaring loop never leaves that domain.
  BnPtr n_minus_1_mont = new_bn();
  check(BN_to_montgomery(n_minus_1_mont.get(), n_minus_1.get(), mont.get(), ctx), "to_mont");

  auto passes = [&](BIGNUM* y) {
    if (BN_is_one(y) || BN_cmp(y, n_minus_1.get()) == 0) return true;
    check(BN_to_montgomery(y, y, mont.get(), ctx), "to_mont");
    for (int i = 1; i < s; ++i) {
      check(BN_mod_mul_montgomery(y, y, y, mont.get(), ctx), "sqr");
      if (BN_cmp(y, n_minus_1_mont.get()) == 0) return true;
    }
    return false;
  };

  BnPtr y = new_bn();
  check(BN_mod_exp_mont_word(y.get(), 2, d.get(), n, ctx, mont.get()), "mod_exp_word");
  if (!passes(y.get())) return false;

  // Bases in [2, n-2].
  BnPtr range = new_bn();
  check(BN_sub(range.get(), n, BN_value_one()), "BN_sub");
  check(BN_sub_word(range.get(), 2), "BN_sub_word");
  const auto width = static_cast<std::size_t>(BN_num_bytes(n)) + 8;
  for (int r = 0; r < extra_rounds; ++r) {
    BnPtr a = bn_from_bytes(rng.bytes(width));
    check(BN_nnmod(a.get(), a.get(), range.get(), ctx), "nnmod");
    check(BN_add_word(a.get(), 2), "add_word");
    check(BN_mod_exp_mont(y.get(), a.get(), d.get(), n, ctx, mont.get()), "mod_exp");
    if (!passes(y.get())) return false;
  }
  return true;
}

BnPtr find_prime(RandomSource& rng, int bits, BN_ULONG public_exponent, BN_CTX* ctx) {
  const auto& primes = small_primes();
  // Candidates are base + 2*j for j in [0, kWindow).
  constexpr std::size_t kWindow = 1 << 14;
  std::vector<bool> composite(kWindow);
  while (true) {
    Bytes raw = rng.bytes(static_cast<std::size_t>(bits) / 8);
    raw[0] |= 0xC0;  // top two bits set, so p*q has the full modulus length
    raw.back() |= 0x01;
    BnPtr base = bn_from_bytes(raw);
    std::fill(composite.begin(), composite.end(), false);
    for (BN_ULONG p : primes) {
      BN_ULONG r = BN_mod_word(base.get(), p);
      // Smallest j with base + 2j == 0 (mod p); 2 is invertible since p is odd.
      BN_ULONG need = r == 0 ? 0 : p - r;
      BN_ULONG j = (need % 2 == 0) ? need / 2 : (need + p) / 2;
      for (; j < kWindow; j += p) composite[j] = true;
    }
    for (std::size_t j = 0; j < kWindow; ++j) {
      if (composite[j]) continue;
      BnPtr candidate = new_bn();
      check(BN_copy(candidate.get(), base.get()) != nullptr, "copy");
      check(BN_add_word(candidate.get(), 2 * static_cast<BN_ULONG>(j)), "add_word");
      if (BN_num_bits(candidate.get()) != bits) break;
      // e must be invertible mod p-1.
      if (BN_mod_word(candidate.get(), public_exponent) == 1) continue;
      // Five rounds total: the FIPS 186-4 count for 1024-bit RSA primes.
      if (miller_rabin(candidate.get(), 4, rng, ctx)) return candidate;
    }
  }
}

void mgf1_sha256_xor(ByteView seed, std::span<std::uint8_t> out) {
  std::uint32_t counter = 0;
  std::size_t pos = 0;
  while (pos < out.size()) {
    Bytes input(seed.begin(), seed.end());
    input.push_back(static_cast<std::uint8_t>(counter >> 24));
    input.push_back(static_cast<std::uint8_t>(counter >> 16));
    input.push_back(static_cast<std::uint8_t>(counter >> 8));
    input.push_back(static_cast<std::uint8_t>(counter));
    Bytes block = sha256(input);
    for (std::size_t i = 0; i < block.size() && pos < out.size(); ++i, ++pos) {
      out[pos] ^= block[i];
    }
    ++counter;
  }
}

}  // namespace

Bytes RandomSource::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

std::uint64_t RandomSource::next_u64() {
  std::array<std::uint8_t, 8> b{};
  fill(b);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t RandomSource::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform: zero bound");
  std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  while (true) {
    std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

DeterministicRandom::DeterministicRandom(ByteView key) : key_(key.begin(), key.end()) {}

DeterministicRandom DeterministicRandom::from_seed(std::uint64_t seed, std::string_view label) {
  Bytes key = to_bytes("emeforge-seed:");
  key.insert(key.end(), label.begin(), label.end());
  key.push_back(':');
  for (int i = 7; i >= 0; --i) key.push_back(static_cast<std::uint8_t>(seed >> (8 * i)));
  return DeterministicRandom(sha256(key));
}

void DeterministicRandom::fill(std::span<std::uint8_t> out) {
  for (auto& byte : out) {
    if (used_ == block_.size()) {
      std::array<std::uint8_t, 8> ctr{};
      for (int i = 0; i < 8; ++i) ctr[i] = static_cast<std::uint8_t>(counter_ >> (56 - 8 * i));
      ++counter_;
      Bytes b = hmac_sha256(key_, ctr);
      std::copy(b.begin(), b.end(), block_.begin());
      used_ = 0;
    }
    byte = block_[used_++];
  }
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
  check(RAND_bytes(out.data(), static_cast<int>(out.size())), "RAND_bytes");
}

Bytes sha256(ByteView data) {
  Bytes out(SHA256_DIGEST_LENGTH);
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Bytes hmac_sha256(ByteView key, ByteView data) {
  Bytes out(32);
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
       out.data(), &len);
  out.resize(len);
  return out;
}

namespace {
Bytes aes_cbc(ByteView key, ByteView iv, ByteView in, Padding padding, bool encrypt) {
  if (key.size() != kAesKeySize || iv.size() != kAesBlockSize) {
    throw std::invalid_argument("aes-128-cbc needs a 16-byte key and iv");
  }
  if (!encrypt && in.size() % kAesBlockSize != 0) {
    fail(ErrorCode::kDecryptFailed, "ciphertext is not a whole number of blocks");
  }
  if (encrypt && padding == Padding::kNone && in.size() % kAesBlockSize != 0) {
    throw std::invalid_argument("unpadded CBC input must be block aligned");
  }
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  check(ctx != nullptr, "EVP_CIPHER_CTX_new");
  check(EVP_CipherInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr, key.data(), iv.data(),
                          encrypt ? 1 : 0),
        "EVP_CipherInit_ex");
  EVP_CIPHER_CTX_set_padding(ctx.get(), padding == Padding::kPkcs7 ? 1 : 0);
  Bytes out(in.size() + kAesBlockSize);
  int len = 0;
  check(EVP_CipherUpdate(ctx.get(), out.data(), &len, in.data(), static_cast<int>(in.size())),
        "EVP_CipherUpdate");
  int tail = 0;
  if (EVP_CipherFinal_ex(ctx.get(), out.data() + len, &tail) <= 0) {
    fail(ErrorCode::kDecryptFailed, "bad CBC padding");
  }
  out.resize(static_cast<std::size_t>(len + tail));
  return out;
}
}  // namespace

Bytes aes_cbc_encrypt(ByteView key, ByteView iv, ByteView plaintext, Padding padding) {
  return aes_cbc(key, iv, plaintext, padding, true);
}

Bytes aes_cbc_decrypt(ByteView key, ByteView iv, ByteView ciphertext, Padding padding) {
  return aes_cbc(key, iv, ciphertext, padding, false);
}

RsaPublicKey::RsaPublicKey(Bytes modulus, Bytes exponent)
    : modulus_(std::move(modulus)), exponent_(std::move(exponent)) {
  if (modulus_.empty() || exponent_.empty()) return;
  std::unique_ptr<OSSL_PARAM_BLD, ParamBldDeleter> bld(OSSL_PARAM_BLD_new());
  BnPtr n = bn_from_bytes(modulus_);
  BnPtr e = bn_from_bytes(exponent_);
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_N, n.get()), "push n");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_E, e.get()), "push e");
  pkey_ = pkey_from_params(bld.get(), EVP_PKEY_PUBLIC_KEY);
}

EVP_PKEY* RsaPublicKey::handle() const { return pkey_.get(); }

bool RsaPublicKey::verify(ByteView data, ByteView signature) const {
  if (!pkey_) return false;
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, handle()) <= 0) return false;
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), data.data(),
                          data.size()) == 1;
}

Bytes oaep_encode_sha256(ByteView message, std::size_t k, ByteView seed) {
  constexpr std::size_t kHashLen = 32;
  if (seed.size() != kHashLen) throw std::invalid_argument("OAEP seed must be 32 bytes");
  if (k < 2 * kHashLen + 2 || message.size() > k - 2 * kHashLen - 2) {
    throw std::invalid_argument("message too long for OAEP");
  }
  Bytes em(k, 0);
  auto masked_seed = std::span<std::uint8_t>(em).subspan(1, kHashLen);
  auto db = std::span<std::uint8_t>(em).subspan(1 + kHashLen);
  Bytes label_hash = sha256({});
  std::copy(label_hash.begin(), label_hash.end(), db.begin());
  db[db.size() - message.size() - 1] = 0x01;
  std::copy(message.begin(), message.end(), db.end() - static_cast<std::ptrdiff_t>(message.size()));
  mgf1_sha256_xor(seed, db);
  std::copy(seed.begin(), seed.end(), masked_seed.begin());
  mgf1_sha256_xor(Bytes(db.begin(), db.end()), masked_seed);
  return em;
}

Bytes RsaPublicKey::encrypt_oaep(ByteView plaintext, RandomSource& rng) const {
  if (!pkey_) fail(ErrorCode::kBadValue, "empty public key");
  Bytes seed = rng.bytes(32);
  Bytes em = oaep_encode_sha256(plaintext, modulus_.size(), seed);
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new(handle(), nullptr));
  check(EVP_PKEY_encrypt_init(ctx.get()), "encrypt_init");
  check(EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_NO_PADDING), "set_padding");
  std::size_t len = 0;
  check(EVP_PKEY_encrypt(ctx.get(), nullptr, &len, em.data(), em.size()), "encrypt size");
  Bytes out(len);
  check(EVP_PKEY_encrypt(ctx.get(), out.data(), &len, em.data(), em.size()), "encrypt");
  out.resize(len);
  return out;
}

RsaPrivateKey RsaPrivateKey::generate(RandomSource& rng, int bits) {
  constexpr BN_ULONG kPublicExponent = 65537;
  BnCtxPtr ctx(BN_CTX_new());
  BnPtr p, q;
  BnPtr n = new_bn();
  do {
    p = find_prime(rng, bits / 2, kPublicExponent, ctx.get());
    q = find_prime(rng, bits / 2, kPublicExponent, ctx.get());
    if (BN_cmp(p.get(), q.get()) == 0) continue;
    check(BN_mul(n.get(), p.get(), q.get(), ctx.get()), "mul");
  } while (BN_num_bits(n.get()) != bits);
  if (BN_cmp(p.get(), q.get()) < 0) std::swap(p, q);

  BnPtr e = new_bn();
  check(BN_set_word(e.get(), kPublicExponent), "set_word");
  BnPtr p1 = new_bn(), q1 = new_bn(), phi = new_bn(), d = new_bn();
  check(BN_sub(p1.get(), p.get(), BN_value_one()), "sub");
  check(BN_sub(q1.get(), q.get(), BN_value_one()), "sub");
  check(BN_mul(phi.get(), p1.get(), q1.get(), ctx.get()), "mul");
  check(BN_mod_inverse(d.get(), e.get(), phi.get(), ctx.get()) != nullptr, "mod_inverse");
  BnPtr dmp1 = new_bn(), dmq1 = new_bn(), iqmp = new_bn();
  check(BN_mod(dmp1.get(), d.get(), p1.get(), ctx.get()), "mod");
  check(BN_mod(dmq1.get(), d.get(), q1.get(), ctx.get()), "mod");
  check(BN_mod_inverse(iqmp.get(), q.get(), p.get(), ctx.get()) != nullptr, "mod_inverse");

  std::unique_ptr<OSSL_PARAM_BLD, ParamBldDeleter> bld(OSSL_PARAM_BLD_new());
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_N, n.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_E, e.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_D, d.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_FACTOR1, p.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_FACTOR2, q.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_EXPONENT1, dmp1.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_EXPONENT2, dmq1.get()), "push");
  check(OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_RSA_COEFFICIENT1, iqmp.get()), "push");

  RsaPrivateKey key;
  key.pkey_ = pkey_from_params(bld.get(), EVP_PKEY_KEYPAIR);
  key.public_key_ = RsaPublicKey(bn_to_bytes(n.get()), bn_to_bytes(e.get()));
  return key;
}

Bytes RsaPrivateKey::sign(ByteView data) const {
  if (!pkey_) fail(ErrorCode::kBadValue, "empty private key");
  MdCtxPtr ctx(EVP_MD_CTX_new());
  check(EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()), "sign_init");
  std::size_t len = 0;
  check(EVP_DigestSign(ctx.get(), nullptr, &len, data.data(), data.size()), "sign size");
  Bytes out(len);
  check(EVP_DigestSign(ctx.get(), out.data(), &len, data.data(), data.size()), "sign");
  out.resize(len);
  return out;
}

Bytes RsaPrivateKey::decrypt_oaep(ByteView ciphertext) const {
  if (!pkey_) fail(ErrorCode::kBadValue, "empty private key");
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new(pkey_.get(), nullptr));
  check(EVP_PKEY_decrypt_init(ctx.get()), "decrypt_init");
  check(EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_OAEP_PADDING), "padding");
  check(EVP_PKEY_CTX_set_rsa_oaep_md(ctx.get(), EVP_sha256()), "oaep md");
  check(EVP_PKEY_CTX_set_rsa_mgf1_md(ctx.get(), EVP_sha256()), "mgf1 md");
  std::size_t len = 0;
  if (EVP_PKEY_decrypt(ctx.get(), nullptr, &len, ciphertext.data(), ciphertext.size()) <= 0) {
    fail(ErrorCode::kDecryptFailed, "RSA-OAEP size query failed");
  }
  Bytes out(len);
  if (EVP_PKEY_decrypt(ctx.get(), out.data(), &len, ciphertext.data(), ciphertext.size()) <= 0) {
    fail(ErrorCode::kDecryptFailed, "RSA-OAEP decryption failed");
  }
  out.resize(len);
  return out;
}

}  // namespace emeforge::crypto
