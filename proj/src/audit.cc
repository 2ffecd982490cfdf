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

#include <set>
#include <string>

#include "ftl/protocol.h"

namespace ftl::protocol {
namespace {

using transport::Direction;
using transport::MsgType;
using transport::TranscriptEntry;
using transport::TypeName;

class Auditor {
 public:
  explicit Auditor(AuditReport& r) : r_(r) {}

  void Fail(const std::string& party, const TranscriptEntry& e,
            const std::string& why) {
    r_.ok = false;
    r_.violations.push_back(party + " " + TypeName(e.frame.type) + "@" +
                            std::to_string(e.frame.iteration) + ": " + why);
  }

  // Every ciphertext in a component payload must parse under `pk`.
  bool ComponentsUnder(std::span<const uint8_t> payload,
                       const he::PublicKeyPtr& pk) {
    try {
      size_t off = 0;
      while (off < payload.size()) {
        transport::BlockHeader h = transport::ReadBlockHeader(payload, off);
        const size_t end = off + h.byte_len;
        for (uint64_t i = 0; i < uint64_t(h.items) * h.per_item; ++i) {
          he::ReadCiphertext(payload, off, pk);
        }
        if (off != end) return false;
      }
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  std::optional<size_t> VectorUnder(std::span<const uint8_t> payload,
                                    const he::PublicKeyPtr& pk) {
    try {
      return ParseEncVector(payload, pk).size();
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::optional<size_t> BlobSize(std::span<const uint8_t> payload,
                                 const he::PublicKey& pk) {
    try {
      return ParseBlob(payload, pk).size();
    } catch (const Error&) {
      return std::nullopt;
    }
  }

 private:
  AuditReport& r_;
};

const Mask* FindMask(const std::vector<Mask>& masks, const std::string& purpose,
                     uint32_t iteration) {
  for (const Mask& m : masks) {
    if (m.purpose == purpose && m.iteration == iteration) return &m;
  }
  return nullptr;
}

bool AllZero(const Mask& m) {
  for (const BigInt& v : m.raw) {
    if (v != 0) return false;
  }
  return true;
}

void CheckMaskFreshness(const std::vector<Mask>& masks, const std::string& who,
                        AuditReport& r) {
  std::set<std::pair<std::string, uint32_t>> seen_slot;
  std::set<std::pair<std::string, std::string>> seen_value;
  for (const Mask& m : masks) {
    ++r.masks_checked;
    if (!seen_slot.insert({m.purpose, m.iteration}).second) {
      r.ok = false;
      r.violations.push_back(who + " drew two " + m.purpose + " masks in " +
                             "iteration " + std::to_string(m.iteration));
    }
    if (AllZero(m)) {
      r.ok = false;
      r.violations.push_back(who + " " + m.purpose + " mask at iteration " +
                             std::to_string(m.iteration) + " is zero");
    }
    std::string key;
    for (const BigInt& v : m.raw) key += v.get_str(16) + ",";
    if (!seen_value.insert({m.purpose, key}).second) {
      r.ok = false;
      r.violations.push_back(who + " reused a " + m.purpose + " mask at " +
                             "iteration " + std::to_string(m.iteration));
    }
  }
}

// A masked frame must be matched by a fresh, non-zero mask of the right size
// drawn by the sender for that iteration.
void CheckMasked(Auditor& au, const std::string& who, const TranscriptEntry& e,
                 std::optional<size_t> count, const std::vector<Mask>& masks,
                 const std::string& purpose) {
  if (!count) {
    au.Fail(who, e, "not a ciphertext vector under the receiver's key");
    return;
  }
  const Mask* m = FindMask(masks, purpose, e.frame.iteration);
  if (!m) {
    au.Fail(who, e, "no " + purpose + " mask for this iteration");
  } else if (m->raw.size() != *count) {
    au.Fail(who, e, "mask covers " + std::to_string(m->raw.size()) + " of " +
                        std::to_string(*count) + " values");
  } else if (AllZero(*m)) {
    au.Fail(who, e, "mask is zero");
  }
}

}  // namespace

AuditReport AuditTraining(const SecureTrainResult& r) {
  AuditReport rep;
  Auditor au(rep);
  CheckMaskFreshness(r.record_a.masks, "A", rep);
  CheckMaskFreshness(r.record_b.masks, "B", rep);

  for (const TranscriptEntry& e : r.transcript_a.Entries()) {
    if (e.direction != Direction::kReceived) continue;
    ++rep.frames_checked;
    const auto& p = e.frame.payload;
    switch (e.frame.type) {
      case MsgType::kPubKey:
        break;
      case MsgType::kComponentsB:
        if (!au.ComponentsUnder(p, r.pk_b)) {
          au.Fail("A", e, "component not under B's key");
        }
        break;
      case MsgType::kMaskedGradB:
        CheckMasked(au, "A", e, au.VectorUnder(p, r.pk_a), r.record_b.masks,
                    "grad_b");
        break;
      case MsgType::kDecryptedBlob: {
        auto n = au.BlobSize(p, *r.pk_b);
        if (!n || *n != size_t(r.num_params_a) + 1) {
          au.Fail("A", e, "blob is not A's own gradient plus loss");
        } else if (!FindMask(r.record_a.masks, "grad_a", e.frame.iteration) ||
                   !FindMask(r.record_a.masks, "loss", e.frame.iteration)) {
          au.Fail("A", e, "blob values were not masked by A");
        }
        break;
      }
      default:
        au.Fail("A", e, "unexpected message for party A");
    }
  }

  for (const TranscriptEntry& e : r.transcript_b.Entries()) {
    if (e.direction != Direction::kReceived) continue;
    ++rep.frames_checked;
    const auto& p = e.frame.payload;
    switch (e.frame.type) {
      case MsgType::kPubKey:
        break;
      case MsgType::kComponentsA:
        if (!au.ComponentsUnder(p, r.pk_a)) {
          au.Fail("B", e, "component not under A's key");
        }
        break;
      case MsgType::kMaskedGradA:
        CheckMasked(au, "B", e, au.VectorUnder(p, r.pk_b), r.record_a.masks,
                    "grad_a");
        break;
      case MsgType::kEncLoss:
        CheckMasked(au, "B", e, au.VectorUnder(p, r.pk_b), r.record_a.masks,
                    "loss");
        break;
      case MsgType::kDecryptedBlob: {
        auto n = au.BlobSize(p, *r.pk_a);
        if (!n || *n != size_t(r.num_params_b)) {
          au.Fail("B", e, "blob is not B's own gradient");
        } else if (!FindMask(r.record_b.masks, "grad_b", e.frame.iteration)) {
          au.Fail("B", e, "blob values were not masked by B");
        }
        break;
      }
      case MsgType::kStop:
        if (p.size() != 1 || p[0] > 1) au.Fail("B", e, "stop carries data");
        break;
      default:
        au.Fail("B", e, "unexpected message for party B");
    }
  }

  for (const ExposureEntry& x : r.record_a.exposure) {
    if (x.what != Learned::kOwnGradient && x.what != Learned::kLoss &&
        x.what != Learned::kPeerMasked) {
      rep.ok = false;
      rep.violations.push_back("A learned an unexpected plaintext kind");
    }
  }
  for (const ExposureEntry& x : r.record_b.exposure) {
    if (x.what != Learned::kOwnGradient && x.what != Learned::kPeerMasked) {
      rep.ok = false;
      rep.violations.push_back("B learned an unexpected plaintext kind");
    }
  }
  return rep;
}

AuditReport AuditPrediction(const SecurePredictResult& r) {
  AuditReport rep;
  Auditor au(rep);
  CheckMaskFreshness(r.masks, "translator", rep);
  for (const TranscriptEntry& e : r.feature_transcript.Entries()) {
    if (e.direction != Direction::kReceived) continue;
    ++rep.frames_checked;
    switch (e.frame.type) {
      case MsgType::kPredictMasked:
        CheckMasked(au, "feature", e, au.VectorUnder(e.frame.payload, r.feature_pk),
                    r.masks, "predict");
        break;
      case MsgType::kPredictLabels:
        break;
      default:
        au.Fail("feature", e, "unexpected message for the feature side");
    }
  }
  for (const TranscriptEntry& e : r.translator_transcript.Entries()) {
    if (e.direction != Direction::kReceived) continue;
    ++rep.frames_checked;
    switch (e.frame.type) {
      case MsgType::kPubKey:
        break;
      case MsgType::kPredictRequest: {
        // rows u32 | d u32 | ciphertext vector under the feature key
        auto body = std::span<const uint8_t>(e.frame.payload);
        if (body.size() < 8 || !au.VectorUnder(body.subspan(8), r.feature_pk)) {
          au.Fail("translator", e, "request not under the feature key");
        }
        break;
      }
      case MsgType::kDecryptedBlob: {
        auto n = au.BlobSize(e.frame.payload, *r.feature_pk);
        if (!n || r.masks.empty() || *n != r.masks[0].raw.size()) {
          au.Fail("translator", e, "blob does not match its own masks");
        }
        break;
      }
      default:
        au.Fail("translator", e, "unexpected message for the translator");
    }
  }
  return rep;
}

}  // namespace ftl::protocol
