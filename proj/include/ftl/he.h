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

// Paillier encryption with fixed-point encoding of reals.
//
// Every ciphertext carries the fingerprint of the key that produced it and a
// fractional-bit counter. Multiplying by an encoded plaintext adds the
// plaintext's fractional bits to the counter; additions require equal
// counters. Rescaling down is only possible after decryption.

#ifndef FTL_HE_H_
#define FTL_HE_H_

#include <gmpxx.h>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ftl/errors.h"

namespace ftl::he {

using BigInt = mpz_class;
using Bytes = std::vector<uint8_t>;

inline constexpr int kDefaultKeyBits = 1024;
inline constexpr int kDefaultFracBits = 40;

// Source of randomness for key generation, encryption and masks. Seeded
// instances produce reproducible streams; FromEntropy() draws its seed from
// the OS.
class RandomSource {
 public:
  static RandomSource Seeded(uint64_t seed);
  static RandomSource FromEntropy();

  RandomSource(RandomSource&&) noexcept;
  RandomSource& operator=(RandomSource&&) noexcept;
  ~RandomSource();

  // Uniform in [0, bound).
  BigInt Below(const BigInt& bound);
  // Uniform with exactly `bits` random bits (top bit not forced).
  BigInt Bits(int bits);
  uint64_t NextU64();
  // Uniform real in [0, 1).
  double NextUnit();

 private:
  explicit RandomSource(const BigInt& seed);
  struct State;
  std::unique_ptr<State> state_;
};

struct PublicKey {
  BigInt n;
  BigInt g;  // n + 1
  BigInt n_squared;
  BigInt half_n;  // floor(n / 2): plaintexts above it decode as negative
  int bits = 0;
  uint64_t fingerprint = 0;

  // Serialized ciphertext magnitude width in bytes (size of n^2).
  size_t CiphertextWidth() const;
};

struct PrivateKey {
  BigInt lambda;  // lcm(p - 1, q - 1)
  BigInt mu;      // (L(g^lambda mod n^2))^-1 mod n
  BigInt p, q;
  // CRT decryption constants.
  BigInt p_squared, q_squared, hp, hq, p_inv_q;
};

using PublicKeyPtr = std::shared_ptr<const PublicKey>;

struct KeyPair {
  PublicKeyPtr pub;
  PrivateKey priv;
};

// Builds a public key from its modulus, computing the derived fields.
PublicKeyPtr MakePublicKey(const BigInt& n);

// Generates a key pair whose modulus has exactly `bits` bits.
// Throws RangeError unless bits >= 512 and even.
KeyPair KeyGen(int bits, RandomSource& rng);

// Signed real scaled by 2^frac_bits.
struct FixedPoint {
  BigInt raw;
  int frac_bits = 0;

  bool operator==(const FixedPoint&) const = default;
};

// raw = round(x * 2^frac_bits). Throws EncodingError on non-finite input.
FixedPoint Encode(double x, int frac_bits);
// Same, additionally rejecting |raw| > n/2 for the given key.
FixedPoint Encode(double x, int frac_bits, const PublicKey& pk);
double Decode(const FixedPoint& fp);
// Decodes after checking the counter; a mismatch is a ScaleError.
double Decode(const FixedPoint& fp, int expected_frac_bits);

// Maps a signed raw value into [0, n) by wraparound, and back.
BigInt ToPlaintext(const BigInt& signed_raw, const PublicKey& pk);
BigInt FromPlaintext(const BigInt& plaintext, const PublicKey& pk);

class Ciphertext {
 public:
  Ciphertext() = default;
  Ciphertext(PublicKeyPtr key, BigInt value, int frac_bits);

  const BigInt& value() const { return value_; }
  int frac_bits() const { return frac_bits_; }
  uint64_t key_id() const { return key_ ? key_->fingerprint : 0; }
  const PublicKeyPtr& key() const { return key_; }

 private:
  PublicKeyPtr key_;
  BigInt value_;
  int frac_bits_ = 0;
};

// Encrypts a plaintext integer 0 <= m < n. Throws RangeError otherwise.
Ciphertext Encrypt(const PublicKeyPtr& pk, const BigInt& m, RandomSource& rng,
                   int frac_bits = 0);
// Encrypts a signed fixed-point value, wrapping negatives into [n/2, n).
Ciphertext Encrypt(const PublicKeyPtr& pk, const FixedPoint& x,
                   RandomSource& rng);
Ciphertext EncryptReal(const PublicKeyPtr& pk, double x, int frac_bits,
                       RandomSource& rng);

// Plaintext in [0, n). Throws KeyError when c was not produced under kp.
BigInt DecryptRaw(const KeyPair& kp, const Ciphertext& c);
// Same result via the textbook lambda/mu formula (slower; used in tests).
BigInt DecryptRawTextbook(const KeyPair& kp, const Ciphertext& c);
FixedPoint Decrypt(const KeyPair& kp, const Ciphertext& c);

// Dec(Add(a, b)) = a + b mod n. Keys and counters must match.
Ciphertext Add(const Ciphertext& a, const Ciphertext& b);
Ciphertext Negate(const Ciphertext& c);
Ciphertext Sub(const Ciphertext& a, const Ciphertext& b);
// Dec = k * a mod n for 0 <= k < n; the counter is unchanged.
Ciphertext ScalarMul(const BigInt& k, const Ciphertext& c);
// Multiplies by a signed encoded plaintext; counters add.
Ciphertext Mul(const FixedPoint& k, const Ciphertext& c);
// Multiplies by 2^bits, raising the counter by `bits`.
Ciphertext Rescale(const Ciphertext& c, int bits);
// Brings c to the target counter (must not be below the current one).
Ciphertext RescaleTo(const Ciphertext& c, int target_frac_bits);
// Ciphertext of zero that needs no randomness (the identity 1 mod n^2).
Ciphertext TrivialZero(const PublicKeyPtr& pk, int frac_bits);

// Sum of plain[i] * enc[i]. The result carries plain.frac + enc.frac
// fractional bits; zero plaintext entries are skipped.
Ciphertext EncDot(std::span<const FixedPoint> plain,
                  std::span<const Ciphertext> enc);

// Wire format: 8-byte key fingerprint, 1-byte counter, 4-byte big-endian
// length, then the big-endian magnitude zero-padded to the key's n^2 width.
void AppendCiphertext(const Ciphertext& c, Bytes& out);
Bytes SerializeCiphertext(const Ciphertext& c);
// Parses one ciphertext at `offset`, advancing it. The fingerprint must match
// `expected`.
Ciphertext ReadCiphertext(std::span<const uint8_t> in, size_t& offset,
                          const PublicKeyPtr& expected);
size_t SerializedCiphertextSize(const PublicKey& pk);

// Big-endian magnitude helpers shared with other wire formats.
Bytes ToBytes(const BigInt& v, size_t width = 0);
BigInt FromBytes(std::span<const uint8_t> bytes);

// Public key wire format: 4-byte bit count, 4-byte length, modulus bytes.
Bytes SerializePublicKey(const PublicKey& pk);
PublicKeyPtr ParsePublicKey(std::span<const uint8_t> in);

}  // namespace ftl::he

#endif  // FTL_HE_H_
