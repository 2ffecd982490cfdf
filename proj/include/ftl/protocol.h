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

// Two-party secure training and prediction.
//
// Party A holds labeled source data and the labels of B's D_c rows; party B
// holds target features. Each iteration:
//
//   A -> B  COMPONENTS_A   [[1/8 D(y) Phi Phi']], [[1/2 C(y) Phi]] over D_c,
//                          [[gamma kappa u^A]] over D_AB        (A's key)
//   B -> A  COMPONENTS_B   [[u u']], [[u]] over D_c, [[kappa u^B]] over D_AB,
//                          [[lambda/2 |Theta^B|^2 + gamma sum l2B]] (B's key)
//   A -> B  MASKED_GRAD_A  [[dL/dTheta^A + m^A]]_B, ENC_LOSS [[L + m^L]]_B
//   B -> A  MASKED_GRAD_B  [[dL/dTheta^B + m^B]]_A
//   both    DECRYPTED_BLOB the peer's masked values, decrypted
//   A -> B  STOP           1 byte: 0 continue, 1 stop
//
// with C(y) = -y and D(y) = y^2. Fixed-point levels: components at f bits,
// loss at 2f, gradients at 3f. Masks are uniform integers at the level of the
// value they hide, spanning [-2^mask_bits, 2^mask_bits] in real units.

#ifndef FTL_PROTOCOL_H_
#define FTL_PROTOCOL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ftl/he.h"
#include "ftl/neural.h"
#include "ftl/objective.h"
#include "ftl/transport.h"

namespace ftl::protocol {

using he::BigInt;
using he::Ciphertext;
using nn::Matrix;
using nn::Vector;
using objective::AlignmentKind;
using objective::AlignmentSpec;
using objective::ObjectiveConfig;
using objective::TrainingConfig;
using transport::Channel;

using EncVector = std::vector<Ciphertext>;

// What each party knows about the shared index sets. D_c and D_AB are listed
// in the same agreed order on both sides.
struct PartyAData {
  Matrix x;
  std::vector<int> y_phi;         // per row of x: +-1 if used for Phi, else 0
  std::vector<int> labels_c;      // labels of D_c
  std::vector<int> overlap_rows;  // A's rows of D_AB
};

struct PartyBData {
  Matrix x;
  std::vector<int> labeled_rows;  // B's rows of D_c
  std::vector<int> overlap_rows;  // B's rows of D_AB
};

std::pair<PartyAData, PartyBData> SplitInstance(const Matrix& x_a,
                                                const Matrix& x_b,
                                                const objective::Instance& inst);
objective::Instance JoinInstance(const PartyAData& a, const PartyBData& b);

enum class TransportKind { kLoopback, kTcp };

struct ProtocolOptions {
  int key_bits = he::kDefaultKeyBits;
  int frac_bits = he::kDefaultFracBits;
  int mask_bits = 20;
  AlignmentKind alignment = AlignmentKind::kInnerProduct;
  uint64_t seed_a = 1;
  uint64_t seed_b = 2;
  // Draw protocol randomness from OS entropy instead of the seeds.
  bool use_entropy = false;
  bool keep_payloads = true;
  // Loopback TCP port for the socket transport; 0 picks a free one.
  uint16_t port = 0;

  AlignmentSpec Alignment() const;
  // Throws ConfigError if masked gradients could overflow the plaintext
  // space.
  void Validate() const;
};

struct PartyKeys {
  he::KeyPair a;
  he::KeyPair b;
};
PartyKeys GenerateKeys(int bits, uint64_t seed);

// One ciphertext per entry; d x d matrices are row-major.
struct ComponentsA {
  int d = 0;
  std::vector<EncVector> h1;  // D_c, d*d each
  std::vector<EncVector> h2;  // D_c, d each
  std::vector<EncVector> h3;  // D_AB, d each
};

struct ComponentsB {
  int d = 0;
  std::vector<EncVector> h1;
  std::vector<EncVector> h2;
  std::vector<EncVector> h3;
  Ciphertext h4;
};

ComponentsA ComputeComponentsA(const Matrix& u_a, const PartyAData& data,
                               const Vector& phi, const ObjectiveConfig& cfg,
                               const AlignmentSpec& align, int frac_bits,
                               const he::PublicKeyPtr& pk_a,
                               he::RandomSource& rng);
ComponentsB ComputeComponentsB(const Matrix& u_b, const PartyBData& data,
                               const nn::Params& theta_b,
                               const ObjectiveConfig& cfg,
                               const AlignmentSpec& align, int frac_bits,
                               const he::PublicKeyPtr& pk_b,
                               he::RandomSource& rng);

// Families are tagged 1..3 (and 4 for B's scalar).
transport::Bytes SerializeComponents(const ComponentsA& c);
transport::Bytes SerializeComponents(const ComponentsB& c);
// Checks family shapes against the expected set sizes.
ComponentsA ParseComponentsA(std::span<const uint8_t> payload,
                             const he::PublicKeyPtr& pk, int d, size_t n_c,
                             size_t n_ab);
ComponentsB ParseComponentsB(std::span<const uint8_t> payload,
                             const he::PublicKeyPtr& pk, int d, size_t n_c,
                             size_t n_ab);

struct Mask {
  uint32_t iteration = 0;
  std::string purpose;
  int frac_bits = 0;
  std::vector<BigInt> raw;
};

// Uniform integers in [-2^(mask_bits+frac_bits), 2^(mask_bits+frac_bits)].
Mask DrawMask(size_t count, int frac_bits, int mask_bits, uint32_t iteration,
              std::string purpose, he::RandomSource& rng);
Mask ZeroMask(size_t count, int frac_bits);

// [[dL/dTheta^B + m^B]] under A's key at 3f, one entry per flattened
// parameter. `extra` is an optional plaintext gradient B adds locally.
EncVector AssembleMaskedGradB(const ComponentsA& comps, const nn::Network& net_b,
                              const PartyBData& data, const ObjectiveConfig& cfg,
                              const AlignmentSpec& align, const Mask& mask,
                              int frac_bits, const he::PublicKeyPtr& pk_a,
                              he::RandomSource& rng,
                              const nn::Params* extra = nullptr);

// [[dL/dTheta^A + m^A]] under B's key at 3f.
EncVector AssembleMaskedGradA(const ComponentsB& comps, const nn::Network& net_a,
                              const PartyAData& data, const ObjectiveConfig& cfg,
                              const AlignmentSpec& align, const Mask& mask,
                              int frac_bits, const he::PublicKeyPtr& pk_b,
                              he::RandomSource& rng,
                              const nn::Params* extra = nullptr);

// [[L]] under B's key at 2f (Taylor objective).
Ciphertext AssembleEncLoss(const ComponentsB& comps, const nn::Network& net_a,
                           const PartyAData& data, const ObjectiveConfig& cfg,
                           const AlignmentSpec& align, int frac_bits,
                           const he::PublicKeyPtr& pk_b, he::RandomSource& rng);

// Adds Enc(mask) entrywise.
EncVector ApplyMask(const EncVector& values, const Mask& mask,
                    he::RandomSource& rng);

std::vector<BigInt> DecryptAll(const he::KeyPair& kp, const EncVector& values);
// Subtracts the mask mod n of the key the values were encrypted under and
// decodes at the mask's level.
Vector Unmask(const std::vector<BigInt>& plaintexts, const Mask& mask,
              const he::PublicKey& pk);

transport::Bytes SerializeEncVector(const EncVector& v);
EncVector ParseEncVector(std::span<const uint8_t> payload,
                         const he::PublicKeyPtr& pk);
// Plaintexts of `pk`, each as a fixed-width big-endian integer below n.
transport::Bytes SerializeBlob(const std::vector<BigInt>& values,
                               const he::PublicKey& pk);
std::vector<BigInt> ParseBlob(std::span<const uint8_t> payload,
                              const he::PublicKey& pk);

// Plaintext values a party obtained, for the exposure audit.
enum class Learned {
  kOwnGradient,      // own gradient after unmasking
  kLoss,             // L, party A only
  kPeerMasked,       // peer values it decrypted, still masked
  kPhi,              // translator side after unmasking
  kLabels,           // feature side
};

struct ExposureEntry {
  uint32_t iteration;
  Learned what;
  size_t count;
};

// Per-party record of a training run.
struct PartyRecord {
  std::vector<Mask> masks;
  std::vector<ExposureEntry> exposure;
};

class PartyA {
 public:
  PartyA(PartyAData data, nn::Network net, TrainingConfig cfg,
         ProtocolOptions opt, he::KeyPair keys);

  // Runs training to completion. Parameters and history reflect the last
  // completed iteration if an exception escapes.
  void Train(Channel& ch,
             objective::LocalAutoencoders* local_ae = nullptr);

  const nn::Network& net() const { return net_; }
  const std::vector<double>& loss_history() const { return loss_history_; }
  const std::vector<Vector>& trajectory() const { return trajectory_; }
  const std::vector<double>& iteration_seconds() const { return seconds_; }
  const PartyRecord& record() const { return record_; }

 private:
  PartyAData data_;
  nn::Network net_;
  TrainingConfig cfg_;
  ProtocolOptions opt_;
  he::KeyPair keys_;
  he::RandomSource rng_;
  std::vector<double> loss_history_;
  std::vector<Vector> trajectory_;
  std::vector<double> seconds_;
  PartyRecord record_;
};

class PartyB {
 public:
  PartyB(PartyBData data, nn::Network net, TrainingConfig cfg,
         ProtocolOptions opt, he::KeyPair keys);

  void Train(Channel& ch, objective::LocalAutoencoders* local_ae = nullptr);

  const nn::Network& net() const { return net_; }
  const std::vector<Vector>& trajectory() const { return trajectory_; }
  const PartyRecord& record() const { return record_; }
  int iterations() const { return static_cast<int>(trajectory_.size()); }

 private:
  PartyBData data_;
  nn::Network net_;
  TrainingConfig cfg_;
  ProtocolOptions opt_;
  he::KeyPair keys_;
  he::RandomSource rng_;
  std::vector<Vector> trajectory_;
  PartyRecord record_;
};

struct SecureTrainResult {
  nn::Network net_a;
  nn::Network net_b;
  std::vector<double> loss_history;
  std::vector<Vector> trajectory_a;
  std::vector<Vector> trajectory_b;
  std::vector<double> iteration_seconds;
  transport::Transcript transcript_a;
  transport::Transcript transcript_b;
  PartyRecord record_a;
  PartyRecord record_b;
  he::PublicKeyPtr pk_a;
  he::PublicKeyPtr pk_b;
  int num_params_a = 0;
  int num_params_b = 0;
};

// Runs both parties concurrently over a fresh channel pair. Keys are
// generated from the option seeds when not supplied.
SecureTrainResult TrainSecure(const Matrix& x_a, const Matrix& x_b,
                              const objective::Instance& inst,
                              const nn::Network& net_a,
                              const nn::Network& net_b,
                              const TrainingConfig& cfg,
                              const ProtocolOptions& opt,
                              TransportKind transport,
                              const PartyKeys* keys = nullptr,
                              objective::LocalAutoencoders* local_ae = nullptr);

// Secure evaluation of phi_j = Phi . u_j where one side holds the d-vector
// Phi (translator) and the other the rows u_j (features). The feature side
// sends [[u_j]] under its key, the translator returns [[phi_j + m_j]], the
// feature side decrypts, the translator unmasks and sends back labels.
struct TranslatorOutcome {
  std::vector<double> phi;
  std::vector<int> labels;
  std::vector<Mask> masks;
};
TranslatorOutcome RunTranslatorSide(Channel& ch, const Vector& phi,
                                    const ProtocolOptions& opt,
                                    he::RandomSource& rng);
std::vector<int> RunFeatureSide(Channel& ch, const Matrix& u,
                                const he::KeyPair& own,
                                const ProtocolOptions& opt,
                                he::RandomSource& rng);

struct SecurePredictResult {
  std::vector<int> labels;   // as received by the feature side
  std::vector<double> phi;   // as unmasked by the translator side
  transport::Transcript translator_transcript;
  transport::Transcript feature_transcript;
  std::vector<Mask> masks;
  he::PublicKeyPtr feature_pk;
};

SecurePredictResult SecureLinearPredict(const Vector& phi, const Matrix& u,
                                        const he::KeyPair& feature_keys,
                                        const ProtocolOptions& opt,
                                        TransportKind transport,
                                        uint64_t translator_seed,
                                        uint64_t feature_seed);

// A translates with Phi^A from its labeled rows; B's rows are classified.
SecurePredictResult PredictSecure(const nn::Network& net_a, const Matrix& x_a,
                                  const std::vector<int>& y_phi,
                                  const nn::Network& net_b,
                                  const Matrix& x_b, const PartyKeys& keys,
                                  const ProtocolOptions& opt,
                                  TransportKind transport);

// Roles swapped: B translates with Phi^B, A's rows are classified.
SecurePredictResult CrossPredictSecure(const Vector& phi_b, const Matrix& u_a,
                                       const PartyKeys& keys,
                                       const ProtocolOptions& opt,
                                       TransportKind transport);

// Inspects what each party received during training and checks that the only
// plaintexts are its own masked-then-unmasked values (and the loss at A),
// that every value the peer could decrypt was masked with a fresh mask, and
// that masks never repeat across iterations.
struct AuditReport {
  bool ok = true;
  std::vector<std::string> violations;
  size_t frames_checked = 0;
  size_t masks_checked = 0;
};
AuditReport AuditTraining(const SecureTrainResult& r);
AuditReport AuditPrediction(const SecurePredictResult& r);

}  // namespace ftl::protocol

#endif  // FTL_PROTOCOL_H_
