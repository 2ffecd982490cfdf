/*
 * Copyright 2026 The Secure FTL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ftl/he.h"

#include <cmath>
#include <random>
#include <string>
#include <utility>

namespace ftl::he {

struct RandomSource::State {
  explicit State(const BigInt& seed) : gen(gmp_randinit_mt) { gen.seed(seed); }
  gmp_randclass gen;
};

RandomSource::RandomSource(const BigInt& seed)
    : state_(std::make_unique<State>(seed)) {}
RandomSource::RandomSource(RandomSource&&) noexcept = default;
RandomSource& RandomSource::operator=(RandomSource&&) noexcept = default;
RandomSource::~RandomSource() = default;

RandomSource RandomSource::Seeded(uint64_t seed) {
  BigInt s;
  mpz_import(s.get_mpz_t(), 1, 1, sizeof(seed), 0, 0, &seed);
  return RandomSource(s);
}

RandomSource RandomSource::FromEntropy() {
  BigInt seed = 0;
  try {
    std::random_device rd;
    for (int i = 0; i < 8; ++i) {
      seed <<= 32;
      seed += static_cast<unsigned long>(rd());
    }
  } catch (const std::exception& e) {
    throw KeyGenError(std::string("entropy source unavailable: ") + e.what());
  }
  return RandomSource(seed);
}

BigInt RandomSource::Below(const BigInt& bound) {
  if (bound <= 0) throw RangeError("random bound must be positive");
  return state_->gen.get_z_range(bound);
}

BigInt RandomSource::Bits(int bits) { return state_->gen.get_z_bits(bits); }

uint64_t RandomSource::NextU64() {
  BigInt v = state_->gen.get_z_bits(64);
  uint64_t out = 0;
  size_t count = 0;
  mpz_export(&out, &count, -1, sizeof(out), 0, 0, v.get_mpz_t());
  return out;
}

double RandomSource::NextUnit() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

size_t PublicKey::CiphertextWidth() const {
  return (mpz_sizeinbase(n_squared.get_mpz_t(), 2) + 7) / 8;
}

namespace {

uint64_t Fnv1a(const Bytes& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

BigInt RandomPrime(int bits, RandomSource& rng) {
  for (;;) {
    BigInt candidate = rng.Bits(bits);
    // Top two bits set so that the product of two such primes has exactly
    // 2 * bits bits.
    mpz_setbit(candidate.get_mpz_t(), bits - 1);
    mpz_setbit(candidate.get_mpz_t(), bits - 2);
    BigInt prime;
    mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
    if (mpz_sizeinbase(prime.get_mpz_t(), 2) == static_cast<size_t>(bits)) {
      return prime;
    }
  }
}

BigInt PowMod(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(),
           mod.get_mpz_t());
  return out;
}

BigInt Invert(const BigInt& v, const BigInt& mod) {
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), v.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw KeyError("value not invertible");
  }
  return out;
}

// L(x) = (x - 1) / d.
BigInt LFunction(const BigInt& x, const BigInt& d) { return (x - 1) / d; }

void CheckSameKey(const Ciphertext& a, const Ciphertext& b) {
  if (!a.key() || !b.key()) throw KeyError("ciphertext without key");
  if (a.key_id() != b.key_id()) {
    throw KeyError("ciphertexts encrypted under different keys");
  }
}

}  // namespace

PublicKeyPtr MakePublicKey(const BigInt& n) {
  auto pk = std::make_shared<PublicKey>();
  pk->n = n;
  pk->g = n + 1;
  pk->n_squared = n * n;
  pk->half_n = n / 2;
  pk->bits = static_cast<int>(mpz_sizeinbase(n.get_mpz_t(), 2));
  pk->fingerprint = Fnv1a(ToBytes(n));
  return pk;
}

KeyPair KeyGen(int bits, RandomSource& rng) {
  if (bits < 512 || bits % 2 != 0) {
    throw RangeError("key size must be even and at least 512 bits, got " +
                     std::to_string(bits));
  }
  BigInt p, q, n;
  do {
    p = RandomPrime(bits / 2, rng);
    do {
      q = RandomPrime(bits / 2, rng);
    } while (q == p);
    n = p * q;
  } while (mpz_sizeinbase(n.get_mpz_t(), 2) != static_cast<size_t>(bits));

  KeyPair kp;
  kp.pub = MakePublicKey(n);
  const PublicKey& pk = *kp.pub;
  PrivateKey& sk = kp.priv;
  sk.p = p;
  sk.q = q;
  BigInt pm1 = p - 1, qm1 = q - 1;
  mpz_lcm(sk.lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
  sk.mu = Invert(LFunction(PowMod(pk.g, sk.lambda, pk.n_squared), n), n);
  sk.p_squared = p * p;
  sk.q_squared = q * q;
  sk.hp = Invert(LFunction(PowMod(pk.g, pm1, sk.p_squared), p), p);
  sk.hq = Invert(LFunction(PowMod(pk.g, qm1, sk.q_squared), q), q);
  sk.p_inv_q = Invert(p, q);
  return kp;
}

FixedPoint Encode(double x, int frac_bits) {
  if (!std::isfinite(x)) throw EncodingError("cannot encode non-finite value");
  if (frac_bits < 0) throw EncodingError("negative fractional bit count");
  FixedPoint fp;
  fp.frac_bits = frac_bits;
  fp.raw = std::nearbyint(std::ldexp(x, frac_bits));
  return fp;
}

FixedPoint Encode(double x, int frac_bits, const PublicKey& pk) {
  FixedPoint fp = Encode(x, frac_bits);
  if (abs(fp.raw) > pk.half_n) {
    throw EncodingError("value exceeds the plaintext budget of the key");
  }
  return fp;
}

double Decode(const FixedPoint& fp) {
  long exp = 0;
  double mant = mpz_get_d_2exp(&exp, fp.raw.get_mpz_t());
  return std::ldexp(mant, static_cast<int>(exp) - fp.frac_bits);
}

double Decode(const FixedPoint& fp, int expected_frac_bits) {
  if (fp.frac_bits != expected_frac_bits) {
    throw ScaleError("decoding with " + std::to_string(expected_frac_bits) +
                     " fractional bits, value carries " +
                     std::to_string(fp.frac_bits));
  }
  return Decode(fp);
}

BigInt ToPlaintext(const BigInt& signed_raw, const PublicKey& pk) {
  if (abs(signed_raw) > pk.half_n) {
    throw EncodingError("value exceeds the plaintext budget of the key");
  }
  if (signed_raw >= 0) return signed_raw;
  return pk.n + signed_raw;
}

BigInt FromPlaintext(const BigInt& plaintext, const PublicKey& pk) {
  if (plaintext > pk.half_n) return plaintext - pk.n;
  return plaintext;
}

Ciphertext::Ciphertext(PublicKeyPtr key, BigInt value, int frac_bits)
    : key_(std::move(key)), value_(std::move(value)), frac_bits_(frac_bits) {}

Ciphertext Encrypt(const PublicKeyPtr& pk, const BigInt& m, RandomSource& rng,
                   int frac_bits) {
  if (m < 0 || m >= pk->n) throw RangeError("plaintext outside [0, n)");
  BigInt r;
  do {
    r = rng.Below(pk->n);
  } while (r == 0 || gcd(r, pk->n) != 1);
  // g^m = 1 + m*n (mod n^2) for g = n + 1.
  BigInt gm = (1 + m * pk->n) % pk->n_squared;
  BigInt c = gm * PowMod(r, pk->n, pk->n_squared) % pk->n_squared;
  return Ciphertext(pk, std::move(c), frac_bits);
}

Ciphertext Encrypt(const PublicKeyPtr& pk, const FixedPoint& x,
                   RandomSource& rng) {
  return Encrypt(pk, ToPlaintext(x.raw, *pk), rng, x.frac_bits);
}

Ciphertext EncryptReal(const PublicKeyPtr& pk, double x, int frac_bits,
                       RandomSource& rng) {
  return Encrypt(pk, Encode(x, frac_bits, *pk), rng);
}

BigInt DecryptRaw(const KeyPair& kp, const Ciphertext& c) {
  if (c.key_id() != kp.pub->fingerprint) {
    throw KeyError("ciphertext was not encrypted under this key");
  }
  const PrivateKey& sk = kp.priv;
  BigInt mp = LFunction(PowMod(c.value(), sk.p - 1, sk.p_squared), sk.p) *
              sk.hp % sk.p;
  BigInt mq = LFunction(PowMod(c.value(), sk.q - 1, sk.q_squared), sk.q) *
              sk.hq % sk.q;
  BigInt u = (mq - mp) * sk.p_inv_q % sk.q;
  if (u < 0) u += sk.q;
  return mp + u * sk.p;
}

BigInt DecryptRawTextbook(const KeyPair& kp, const Ciphertext& c) {
  if (c.key_id() != kp.pub->fingerprint) {
    throw KeyError("ciphertext was not encrypted under this key");
  }
  const PublicKey& pk = *kp.pub;
  return LFunction(PowMod(c.value(), kp.priv.lambda, pk.n_squared), pk.n) *
         kp.priv.mu % pk.n;
}

FixedPoint Decrypt(const KeyPair& kp, const Ciphertext& c) {
  return FixedPoint{FromPlaintext(DecryptRaw(kp, c), *kp.pub), c.frac_bits()};
}

Ciphertext Add(const Ciphertext& a, const Ciphertext& b) {
  CheckSameKey(a, b);
  if (a.frac_bits() != b.frac_bits()) {
    throw ScaleError("adding ciphertexts with " +
                     std::to_string(a.frac_bits()) + " and " +
                     std::to_string(b.frac_bits()) + " fractional bits");
  }
  return Ciphertext(a.key(), a.value() * b.value() % a.key()->n_squared,
                    a.frac_bits());
}

Ciphertext Negate(const Ciphertext& c) {
  return Ciphertext(c.key(), Invert(c.value(), c.key()->n_squared),
                    c.frac_bits());
}

Ciphertext Sub(const Ciphertext& a, const Ciphertext& b) {
  return Add(a, Negate(b));
}

Ciphertext ScalarMul(const BigInt& k, const Ciphertext& c) {
  if (!c.key()) throw KeyError("ciphertext without key");
  if (k < 0 || k >= c.key()->n) throw RangeError("scalar outside [0, n)");
  return Ciphertext(c.key(), PowMod(c.value(), k, c.key()->n_squared),
                    c.frac_bits());
}

Ciphertext Mul(const FixedPoint& k, const Ciphertext& c) {
  if (!c.key()) throw KeyError("ciphertext without key");
  if (abs(k.raw) > c.key()->half_n) {
    throw EncodingError("scalar exceeds the plaintext budget of the key");
  }
  // mpz_powm accepts a negative exponent by inverting the base, which is
  // k mod n in plaintext space.
  return Ciphertext(c.key(), PowMod(c.value(), k.raw, c.key()->n_squared),
                    c.frac_bits() + k.frac_bits);
}

Ciphertext Rescale(const Ciphertext& c, int bits) {
  if (bits < 0) throw ScaleError("cannot rescale down under encryption");
  if (bits == 0) return c;
  BigInt factor = 1;
  factor <<= bits;
  return Mul(FixedPoint{factor, bits}, c);
}

Ciphertext RescaleTo(const Ciphertext& c, int target_frac_bits) {
  return Rescale(c, target_frac_bits - c.frac_bits());
}

Ciphertext TrivialZero(const PublicKeyPtr& pk, int frac_bits) {
  return Ciphertext(pk, BigInt(1), frac_bits);
}

Ciphertext EncDot(std::span<const FixedPoint> plain,
                  std::span<const Ciphertext> enc) {
  if (plain.size() != enc.size()) {
    throw ShapeError("enc_dot length mismatch: " +
                     std::to_string(plain.size()) + " vs " +
                     std::to_string(enc.size()));
  }
  if (enc.empty()) throw ShapeError("enc_dot on empty vectors");
  const int frac = plain[0].frac_bits + enc[0].frac_bits();
  BigInt acc = 1;
  const PublicKeyPtr& key = enc[0].key();
  for (size_t i = 0; i < enc.size(); ++i) {
    CheckSameKey(enc[0], enc[i]);
    if (plain[i].frac_bits + enc[i].frac_bits() != frac) {
      throw ScaleError("enc_dot terms carry different fractional bits");
    }
    if (plain[i].raw == 0) continue;
    acc = acc * Mul(plain[i], enc[i]).value() % key->n_squared;
  }
  return Ciphertext(key, std::move(acc), frac);
}

Bytes ToBytes(const BigInt& v, size_t width) {
  size_t count = 0;
  size_t needed = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (v == 0) needed = 0;
  if (width == 0) width = needed;
  if (needed > width) throw EncodingError("integer wider than field");
  Bytes out(width, 0);
  if (needed > 0) {
    mpz_export(out.data() + (width - needed), &count, 1, 1, 1, 0,
               v.get_mpz_t());
  }
  return out;
}

BigInt FromBytes(std::span<const uint8_t> bytes) {
  BigInt v = 0;
  if (!bytes.empty()) {
    mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  }
  return v;
}

namespace {

void PutU32(uint32_t v, Bytes& out) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

uint32_t GetU32(std::span<const uint8_t> in, size_t& off) {
  if (off + 4 > in.size()) throw FramingError("truncated length field");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | in[off + i];
  off += 4;
  return v;
}

}  // namespace

size_t SerializedCiphertextSize(const PublicKey& pk) {
  return 8 + 1 + 4 + pk.CiphertextWidth();
}

void AppendCiphertext(const Ciphertext& c, Bytes& out) {
  if (!c.key()) throw KeyError("ciphertext without key");
  const uint64_t fp = c.key_id();
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(fp >> s));
  if (c.frac_bits() < 0 || c.frac_bits() > 255) {
    throw EncodingError("fractional bit counter does not fit in one byte");
  }
  out.push_back(static_cast<uint8_t>(c.frac_bits()));
  const size_t width = c.key()->CiphertextWidth();
  PutU32(static_cast<uint32_t>(width), out);
  Bytes mag = ToBytes(c.value(), width);
  out.insert(out.end(), mag.begin(), mag.end());
}

Bytes SerializeCiphertext(const Ciphertext& c) {
  Bytes out;
  AppendCiphertext(c, out);
  return out;
}

Ciphertext ReadCiphertext(std::span<const uint8_t> in, size_t& offset,
                          const PublicKeyPtr& expected) {
  if (offset + 9 > in.size()) throw FramingError("truncated ciphertext");
  uint64_t fp = 0;
  for (int i = 0; i < 8; ++i) fp = (fp << 8) | in[offset + i];
  if (fp != expected->fingerprint) {
    throw KeyError("ciphertext fingerprint does not match the expected key");
  }
  const int frac = in[offset + 8];
  offset += 9;
  const uint32_t len = GetU32(in, offset);
  if (offset + len > in.size()) throw FramingError("truncated ciphertext");
  BigInt value = FromBytes(in.subspan(offset, len));
  offset += len;
  if (value <= 0 || value >= expected->n_squared) {
    throw RangeError("ciphertext outside [1, n^2)");
  }
  return Ciphertext(expected, std::move(value), frac);
}

Bytes SerializePublicKey(const PublicKey& pk) {
  Bytes out;
  PutU32(static_cast<uint32_t>(pk.bits), out);
  Bytes n = ToBytes(pk.n);
  PutU32(static_cast<uint32_t>(n.size()), out);
  out.insert(out.end(), n.begin(), n.end());
  return out;
}

PublicKeyPtr ParsePublicKey(std::span<const uint8_t> in) {
  size_t off = 0;
  const uint32_t bits = GetU32(in, off);
  const uint32_t len = GetU32(in, off);
  if (off + len != in.size()) throw FramingError("malformed public key");
  PublicKeyPtr pk = MakePublicKey(FromBytes(in.subspan(off, len)));
  if (static_cast<uint32_t>(pk->bits) != bits) {
    throw KeyError("public key bit count mismatch");
  }
  return pk;
}

}  // namespace ftl::he
