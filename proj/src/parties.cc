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

#include <chrono>
#include <exception>
#include <limits>
#include <thread>

#include "ftl/protocol.h"

namespace ftl::protocol {
namespace {

using transport::Bytes;
using transport::Expect;
using transport::Frame;
using transport::MsgType;

he::RandomSource MakeRng(const ProtocolOptions& opt, uint64_t seed) {
  return opt.use_entropy ? he::RandomSource::FromEntropy()
                         : he::RandomSource::Seeded(seed);
}

void CheckLevel(const EncVector& v, int frac, const char* what) {
  for (const Ciphertext& c : v) {
    if (c.frac_bits() != frac) {
      throw ProtocolError(std::string(what) + " at unexpected fixed-point level");
    }
  }
}

template <typename C>
void CheckComponentLevels(const C& c, int f) {
  for (const auto* fam : {&c.h1, &c.h2, &c.h3}) {
    for (const EncVector& v : *fam) CheckLevel(v, f, "component");
  }
}

// Reconstruction gradient scaled by the configured weight; also steps the
// decoder biases, which never leave the party.
std::optional<nn::Params> ReconstructionTerm(const nn::Network& net,
                                             const Matrix& x,
                                             nn::Autoencoder& ae,
                                             const TrainingConfig& cfg) {
  if (cfg.reconstruction_weight <= 0) return std::nullopt;
  nn::Reconstruction r = nn::ReconstructionLossAndGrad(net, x, ae);
  nn::Params g = nn::ZerosLike(net);
  nn::Axpy(cfg.reconstruction_weight, r.grads, g);
  for (size_t l = 0; l < r.bias_grads.size(); ++l) {
    ae.decoder_bias[l] -=
        cfg.learning_rate * cfg.reconstruction_weight * r.bias_grads[l];
  }
  return g;
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> MakeChannels(
    TransportKind kind, uint16_t port) {
  return kind == TransportKind::kTcp ? transport::TcpPair(port)
                                     : transport::LoopbackPair();
}

// Runs two party bodies concurrently. If either throws, its channel is closed
// so the peer unblocks; the error that happened first is rethrown.
template <typename FA, typename FB>
void RunPair(Channel& ca, Channel& cb, FA&& body_a, FB&& body_b) {
  std::exception_ptr err_a, err_b;
  std::chrono::steady_clock::time_point t_a, t_b;
  std::thread tb([&] {
    try {
      body_b();
    } catch (...) {
      t_b = std::chrono::steady_clock::now();
      err_b = std::current_exception();
      cb.Close();
    }
  });
  try {
    body_a();
  } catch (...) {
    t_a = std::chrono::steady_clock::now();
    err_a = std::current_exception();
    ca.Close();
  }
  tb.join();
  if (err_a && err_b) std::rethrow_exception(t_a <= t_b ? err_a : err_b);
  if (err_a) std::rethrow_exception(err_a);
  if (err_b) std::rethrow_exception(err_b);
}

void PutU32(uint32_t v, Bytes& out) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t GetU32(std::span<const uint8_t> in, size_t off) {
  if (in.size() < off + 4) throw FramingError("truncated field");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | in[off + i];
  return v;
}

}  // namespace

PartyA::PartyA(PartyAData data, nn::Network net, TrainingConfig cfg,
               ProtocolOptions opt, he::KeyPair keys)
    : data_(std::move(data)),
      net_(std::move(net)),
      cfg_(cfg),
      opt_(opt),
      keys_(std::move(keys)),
      rng_(MakeRng(opt, opt.seed_a)) {}

void PartyA::Train(Channel& ch, objective::LocalAutoencoders* local_ae) {
  cfg_.Validate();
  opt_.Validate();
  const int f = opt_.frac_bits;
  const AlignmentSpec align = opt_.Alignment();
  const ObjectiveConfig obj = cfg_.Objective();
  const int d = net_.hidden_dim();
  const size_t num_params = net_.num_params();
  const size_t n_c = data_.labels_c.size(), n_ab = data_.overlap_rows.size();
  if (data_.y_phi.size() != static_cast<size_t>(data_.x.rows())) {
    throw ShapeError("label vector does not match A's rows");
  }

  ch.Send(Frame{MsgType::kPubKey, 0, he::SerializePublicKey(*keys_.pub)});
  const he::PublicKeyPtr pk_b =
      he::ParsePublicKey(Expect(ch, MsgType::kPubKey, 0).payload);

  double prev = std::numeric_limits<double>::infinity();
  for (uint32_t it = 1; it <= static_cast<uint32_t>(cfg_.max_iterations); ++it) {
    const auto start = std::chrono::steady_clock::now();
    const Matrix u_a = nn::Forward(net_, data_.x);
    const Vector phi = objective::ComputePhi(u_a, data_.y_phi);
    ch.Send(Frame{MsgType::kComponentsA, it,
                  SerializeComponents(ComputeComponentsA(
                      u_a, data_, phi, obj, align, f, keys_.pub, rng_))});
    const ComponentsB comps = ParseComponentsB(
        Expect(ch, MsgType::kComponentsB, it).payload, pk_b, d, n_c, n_ab);
    CheckComponentLevels(comps, f);

    std::optional<nn::Params> extra;
    if (local_ae) {
      extra = ReconstructionTerm(net_, local_ae->x_a_all, local_ae->ae_a, cfg_);
    }
    Mask grad_mask =
        DrawMask(num_params, 3 * f, opt_.mask_bits, it, "grad_a", rng_);
    Mask loss_mask = DrawMask(1, 2 * f, opt_.mask_bits, it, "loss", rng_);
    EncVector grad = AssembleMaskedGradA(comps, net_, data_, obj, align,
                                         grad_mask, f, pk_b, rng_,
                                         extra ? &*extra : nullptr);
    EncVector loss = ApplyMask(
        {AssembleEncLoss(comps, net_, data_, obj, align, f, pk_b, rng_)},
        loss_mask, rng_);
    ch.Send(Frame{MsgType::kMaskedGradA, it, SerializeEncVector(grad)});
    ch.Send(Frame{MsgType::kEncLoss, it, SerializeEncVector(loss)});

    // B's masked gradient is under A's key.
    const EncVector grad_b =
        ParseEncVector(Expect(ch, MsgType::kMaskedGradB, it).payload, keys_.pub);
    CheckLevel(grad_b, 3 * f, "masked gradient");
    ch.Send(Frame{MsgType::kDecryptedBlob, it,
                  SerializeBlob(DecryptAll(keys_, grad_b), *keys_.pub)});
    record_.exposure.push_back({it, Learned::kPeerMasked, grad_b.size()});

    std::vector<BigInt> blob =
        ParseBlob(Expect(ch, MsgType::kDecryptedBlob, it).payload, *pk_b);
    if (blob.size() != num_params + 1) {
      throw ProtocolError("decrypted blob has wrong size");
    }
    const BigInt loss_plain = blob.back();
    blob.pop_back();
    const Vector g = Unmask(blob, grad_mask, *pk_b);
    const double l = Unmask({loss_plain}, loss_mask, *pk_b)(0);
    record_.exposure.push_back({it, Learned::kOwnGradient, num_params});
    record_.exposure.push_back({it, Learned::kLoss, 1});
    record_.masks.push_back(std::move(grad_mask));
    record_.masks.push_back(std::move(loss_mask));

    nn::Axpy(-cfg_.learning_rate, nn::Unflatten(g, net_), net_.layers);
    loss_history_.push_back(l);
    trajectory_.push_back(nn::Flatten(net_.layers));

    const bool stop = (prev - l <= cfg_.tolerance) ||
                      it == static_cast<uint32_t>(cfg_.max_iterations);
    ch.Send(Frame{MsgType::kStop, it, Bytes{static_cast<uint8_t>(stop)}});
    seconds_.push_back(std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count());
    if (stop) break;
    prev = l;
  }
}

PartyB::PartyB(PartyBData data, nn::Network net, TrainingConfig cfg,
               ProtocolOptions opt, he::KeyPair keys)
    : data_(std::move(data)),
      net_(std::move(net)),
      cfg_(cfg),
      opt_(opt),
      keys_(std::move(keys)),
      rng_(MakeRng(opt, opt.seed_b)) {}

void PartyB::Train(Channel& ch, objective::LocalAutoencoders* local_ae) {
  cfg_.Validate();
  opt_.Validate();
  const int f = opt_.frac_bits;
  const AlignmentSpec align = opt_.Alignment();
  const ObjectiveConfig obj = cfg_.Objective();
  const int d = net_.hidden_dim();
  const size_t num_params = net_.num_params();
  const size_t n_c = data_.labeled_rows.size(), n_ab = data_.overlap_rows.size();

  ch.Send(Frame{MsgType::kPubKey, 0, he::SerializePublicKey(*keys_.pub)});
  const he::PublicKeyPtr pk_a =
      he::ParsePublicKey(Expect(ch, MsgType::kPubKey, 0).payload);

  for (uint32_t it = 1;; ++it) {
    if (it > static_cast<uint32_t>(cfg_.max_iterations)) {
      throw ProtocolError("peer did not stop within max iterations");
    }
    const Matrix u_b = nn::Forward(net_, data_.x);
    ch.Send(Frame{MsgType::kComponentsB, it,
                  SerializeComponents(ComputeComponentsB(
                      u_b, data_, net_.layers, obj, align, f, keys_.pub, rng_))});
    const ComponentsA comps = ParseComponentsA(
        Expect(ch, MsgType::kComponentsA, it).payload, pk_a, d, n_c, n_ab);
    CheckComponentLevels(comps, f);

    std::optional<nn::Params> extra;
    if (local_ae) {
      extra = ReconstructionTerm(net_, local_ae->x_b_all, local_ae->ae_b, cfg_);
    }
    Mask grad_mask =
        DrawMask(num_params, 3 * f, opt_.mask_bits, it, "grad_b", rng_);
    ch.Send(Frame{MsgType::kMaskedGradB, it,
                  SerializeEncVector(AssembleMaskedGradB(
                      comps, net_, data_, obj, align, grad_mask, f, pk_a, rng_,
                      extra ? &*extra : nullptr))});

    EncVector from_a =
        ParseEncVector(Expect(ch, MsgType::kMaskedGradA, it).payload, keys_.pub);
    CheckLevel(from_a, 3 * f, "masked gradient");
    const EncVector loss =
        ParseEncVector(Expect(ch, MsgType::kEncLoss, it).payload, keys_.pub);
    if (loss.size() != 1) throw ProtocolError("encrypted loss must be a scalar");
    CheckLevel(loss, 2 * f, "encrypted loss");
    from_a.push_back(loss[0]);
    ch.Send(Frame{MsgType::kDecryptedBlob, it,
                  SerializeBlob(DecryptAll(keys_, from_a), *keys_.pub)});
    record_.exposure.push_back({it, Learned::kPeerMasked, from_a.size()});

    const std::vector<BigInt> blob =
        ParseBlob(Expect(ch, MsgType::kDecryptedBlob, it).payload, *pk_a);
    if (blob.size() != num_params) {
      throw ProtocolError("decrypted blob has wrong size");
    }
    const Vector g = Unmask(blob, grad_mask, *pk_a);
    record_.exposure.push_back({it, Learned::kOwnGradient, num_params});
    record_.masks.push_back(std::move(grad_mask));
    nn::Axpy(-cfg_.learning_rate, nn::Unflatten(g, net_), net_.layers);
    trajectory_.push_back(nn::Flatten(net_.layers));

    const Frame stop = Expect(ch, MsgType::kStop, it);
    if (stop.payload.size() != 1 || stop.payload[0] > 1) {
      throw ProtocolError("malformed stop signal");
    }
    if (stop.payload[0] == 1) break;
  }
}

SecureTrainResult TrainSecure(const Matrix& x_a, const Matrix& x_b,
                              const objective::Instance& inst,
                              const nn::Network& net_a,
                              const nn::Network& net_b,
                              const TrainingConfig& cfg,
                              const ProtocolOptions& opt,
                              TransportKind transport, const PartyKeys* keys,
                              objective::LocalAutoencoders* local_ae) {
  cfg.Validate();
  opt.Validate();
  objective::ValidateInstance(nn::Forward(net_a, x_a), nn::Forward(net_b, x_b),
                              inst);
  std::optional<PartyKeys> own_keys;
  if (!keys) {
    own_keys = GenerateKeys(opt.key_bits, opt.seed_a ^ (opt.seed_b << 1));
    keys = &*own_keys;
  }
  auto [data_a, data_b] = SplitInstance(x_a, x_b, inst);
  PartyA a(std::move(data_a), net_a, cfg, opt, keys->a);
  PartyB b(std::move(data_b), net_b, cfg, opt, keys->b);
  auto [ch_a, ch_b] = MakeChannels(transport, opt.port);
  ch_a->transcript() = transport::Transcript(opt.keep_payloads);
  ch_b->transcript() = transport::Transcript(opt.keep_payloads);

  RunPair(
      *ch_a, *ch_b, [&] { a.Train(*ch_a, local_ae); },
      [&] { b.Train(*ch_b, local_ae); });

  SecureTrainResult r;
  r.net_a = a.net();
  r.net_b = b.net();
  r.loss_history = a.loss_history();
  r.trajectory_a = a.trajectory();
  r.trajectory_b = b.trajectory();
  r.iteration_seconds = a.iteration_seconds();
  r.transcript_a = ch_a->transcript();
  r.transcript_b = ch_b->transcript();
  r.record_a = a.record();
  r.record_b = b.record();
  r.pk_a = keys->a.pub;
  r.pk_b = keys->b.pub;
  r.num_params_a = net_a.num_params();
  r.num_params_b = net_b.num_params();
  return r;
}

TranslatorOutcome RunTranslatorSide(Channel& ch, const Vector& phi,
                                    const ProtocolOptions& opt,
                                    he::RandomSource& rng) {
  const int f = opt.frac_bits;
  const he::PublicKeyPtr pk =
      he::ParsePublicKey(Expect(ch, MsgType::kPubKey, 0).payload);
  const Frame req = Expect(ch, MsgType::kPredictRequest, 1);
  const uint32_t rows = GetU32(req.payload, 0), d = GetU32(req.payload, 4);
  if (d != static_cast<uint32_t>(phi.size())) {
    throw ProtocolError("prediction request has dimension " +
                        std::to_string(d) + ", translator has " +
                        std::to_string(phi.size()));
  }
  const EncVector enc = ParseEncVector(
      std::span<const uint8_t>(req.payload).subspan(8), pk);
  if (enc.size() != size_t(rows) * d) {
    throw ProtocolError("prediction request size mismatch");
  }
  CheckLevel(enc, f, "prediction request");

  std::vector<he::FixedPoint> plain;
  for (Eigen::Index a = 0; a < phi.size(); ++a) {
    plain.push_back(he::Encode(phi(a), f, *pk));
  }
  TranslatorOutcome out;
  out.masks.push_back(DrawMask(rows, 2 * f, opt.mask_bits, 1, "predict", rng));
  EncVector dots;
  for (uint32_t j = 0; j < rows; ++j) {
    dots.push_back(he::EncDot(
        plain, std::span<const Ciphertext>(enc.data() + size_t(j) * d, d)));
  }
  ch.Send(Frame{MsgType::kPredictMasked, 1,
                SerializeEncVector(ApplyMask(dots, out.masks[0], rng))});

  const std::vector<BigInt> blob =
      ParseBlob(Expect(ch, MsgType::kDecryptedBlob, 1).payload, *pk);
  const Vector values = Unmask(blob, out.masks[0], *pk);
  Bytes labels;
  PutU32(rows, labels);
  for (uint32_t j = 0; j < rows; ++j) {
    out.phi.push_back(values(j));
    out.labels.push_back(objective::LabelOf(values(j)));
    labels.push_back(static_cast<uint8_t>(static_cast<int8_t>(out.labels.back())));
  }
  ch.Send(Frame{MsgType::kPredictLabels, 1, std::move(labels)});
  return out;
}

std::vector<int> RunFeatureSide(Channel& ch, const Matrix& u,
                                const he::KeyPair& own,
                                const ProtocolOptions& opt,
                                he::RandomSource& rng) {
  const int f = opt.frac_bits;
  ch.Send(Frame{MsgType::kPubKey, 0, he::SerializePublicKey(*own.pub)});
  EncVector enc;
  for (Eigen::Index j = 0; j < u.rows(); ++j) {
    for (Eigen::Index a = 0; a < u.cols(); ++a) {
      enc.push_back(he::EncryptReal(own.pub, u(j, a), f, rng));
    }
  }
  Bytes req;
  PutU32(static_cast<uint32_t>(u.rows()), req);
  PutU32(static_cast<uint32_t>(u.cols()), req);
  Bytes body = SerializeEncVector(enc);
  req.insert(req.end(), body.begin(), body.end());
  ch.Send(Frame{MsgType::kPredictRequest, 1, std::move(req)});

  const EncVector masked =
      ParseEncVector(Expect(ch, MsgType::kPredictMasked, 1).payload, own.pub);
  if (masked.size() != static_cast<size_t>(u.rows())) {
    throw ProtocolError("masked prediction has wrong size");
  }
  ch.Send(Frame{MsgType::kDecryptedBlob, 1,
                SerializeBlob(DecryptAll(own, masked), *own.pub)});

  const Frame lf = Expect(ch, MsgType::kPredictLabels, 1);
  const uint32_t n = GetU32(lf.payload, 0);
  if (n != u.rows() || lf.payload.size() != 4 + size_t(n)) {
    throw ProtocolError("label message has wrong size");
  }
  std::vector<int> labels;
  for (uint32_t j = 0; j < n; ++j) {
    const int y = static_cast<int8_t>(lf.payload[4 + j]);
    if (y != 1 && y != -1) throw ProtocolError("label outside {-1, +1}");
    labels.push_back(y);
  }
  return labels;
}

SecurePredictResult SecureLinearPredict(const Vector& phi, const Matrix& u,
                                        const he::KeyPair& feature_keys,
                                        const ProtocolOptions& opt,
                                        TransportKind transport,
                                        uint64_t translator_seed,
                                        uint64_t feature_seed) {
  opt.Validate();
  if (phi.size() != u.cols()) {
    throw ShapeError("translator and representation dimensions differ");
  }
  auto [ch_t, ch_f] = MakeChannels(transport, opt.port);
  he::RandomSource rng_t = MakeRng(opt, translator_seed);
  he::RandomSource rng_f = MakeRng(opt, feature_seed);
  TranslatorOutcome t;
  SecurePredictResult r;
  RunPair(
      *ch_t, *ch_f, [&] { t = RunTranslatorSide(*ch_t, phi, opt, rng_t); },
      [&] { r.labels = RunFeatureSide(*ch_f, u, feature_keys, opt, rng_f); });
  r.phi = std::move(t.phi);
  r.masks = std::move(t.masks);
  r.translator_transcript = ch_t->transcript();
  r.feature_transcript = ch_f->transcript();
  r.feature_pk = feature_keys.pub;
  return r;
}

SecurePredictResult PredictSecure(const nn::Network& net_a, const Matrix& x_a,
                                  const std::vector<int>& y_phi,
                                  const nn::Network& net_b, const Matrix& x_b,
                                  const PartyKeys& keys,
                                  const ProtocolOptions& opt,
                                  TransportKind transport) {
  const Vector phi = objective::ComputePhi(nn::Forward(net_a, x_a), y_phi);
  return SecureLinearPredict(phi, nn::Forward(net_b, x_b), keys.b, opt,
                             transport, opt.seed_a, opt.seed_b);
}

SecurePredictResult CrossPredictSecure(const Vector& phi_b, const Matrix& u_a,
                                       const PartyKeys& keys,
                                       const ProtocolOptions& opt,
                                       TransportKind transport) {
  return SecureLinearPredict(phi_b, u_a, keys.a, opt, transport, opt.seed_b,
                             opt.seed_a);
}

}  // namespace ftl::protocol
