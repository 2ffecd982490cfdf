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

// Ordered, length-prefixed frame channels between the two parties.
//
// Frame layout (big-endian):
//   "FTL1" | type u8 | iteration u32 | payload_len u64 | payload
//
// Every endpoint keeps a transcript of the frames it sent and consumed, in the
// order its own thread did so. Receive order is recorded at Recv() time rather
// than at arrival so transcripts do not depend on network timing.

#ifndef FTL_TRANSPORT_H_
#define FTL_TRANSPORT_H_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ftl/errors.h"

namespace ftl::transport {

using Bytes = std::vector<uint8_t>;

enum class MsgType : uint8_t {
  kPubKey = 1,
  kComponentsA = 2,
  kComponentsB = 3,
  kMaskedGradA = 4,
  kMaskedGradB = 5,
  kEncLoss = 6,
  kDecryptedBlob = 7,
  kStop = 8,
  kPredictRequest = 9,
  kPredictMasked = 10,
  kPredictLabels = 11,
};

inline constexpr size_t kHeaderSize = 17;

bool IsValidType(uint8_t t);
std::string TypeName(MsgType t);

struct Frame {
  MsgType type = MsgType::kStop;
  uint32_t iteration = 0;
  Bytes payload;

  bool operator==(const Frame&) const = default;
  size_t WireSize() const { return kHeaderSize + payload.size(); }
};

Bytes EncodeFrame(const Frame& f);
// Decodes exactly one frame occupying all of `in`. Throws FramingError.
Frame DecodeFrame(std::span<const uint8_t> in);
// Parses just the header; returns the payload length.
uint64_t ParseHeader(std::span<const uint8_t, kHeaderSize> header,
                     MsgType* type, uint32_t* iteration);

enum class Direction : uint8_t { kSent = 0, kReceived = 1 };

struct TranscriptEntry {
  Direction direction;
  Frame frame;
};

// Thread-safe frame log with byte counters per direction and type.
class Transcript {
 public:
  explicit Transcript(bool keep_payloads = true)
      : keep_payloads_(keep_payloads) {}
  Transcript(const Transcript& other);
  Transcript& operator=(const Transcript& other);

  void Record(Direction dir, const Frame& f);

  std::vector<TranscriptEntry> Entries() const;
  // Wire bytes (header included).
  uint64_t WireBytes(Direction dir) const;
  uint64_t WireBytes(Direction dir, MsgType type) const;
  uint64_t PayloadBytes(Direction dir, MsgType type) const;
  uint64_t FrameCount(Direction dir, MsgType type) const;
  // FNV-1a over every recorded frame's wire encoding, in order.
  uint64_t Hash() const;
  void Clear();

 private:
  mutable std::mutex mu_;
  bool keep_payloads_;
  std::vector<TranscriptEntry> entries_;
  std::map<std::pair<Direction, MsgType>, uint64_t> wire_bytes_;
  std::map<std::pair<Direction, MsgType>, uint64_t> payload_bytes_;
  std::map<std::pair<Direction, MsgType>, uint64_t> counts_;
  uint64_t hash_ = 14695981039346656037ull;
};

class Channel {
 public:
  virtual ~Channel() = default;
  // Throws TransportError if the channel is closed.
  virtual void Send(const Frame& f) = 0;
  // Blocks; std::nullopt once the peer has closed and nothing is pending.
  virtual std::optional<Frame> Recv() = 0;
  virtual void Close() = 0;

  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }

 protected:
  Transcript transcript_;
};

// Receives the next frame and checks its type and iteration. Throws
// ProtocolError on mismatch or end of stream.
Frame Expect(Channel& ch, MsgType type, uint32_t iteration);

// In-process pair. Frames travel as encoded bytes.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> LoopbackPair();

// TCP on the loopback interface. Each channel runs a reader thread that
// drains the socket into a queue so two parties sending large frames at the
// same time cannot deadlock.
class TcpListener {
 public:
  // port 0 picks an ephemeral port.
  explicit TcpListener(uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  std::unique_ptr<Channel> Accept();

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

// Retries for up to `timeout_ms` while the listener comes up.
std::unique_ptr<Channel> TcpConnect(const std::string& host, uint16_t port,
                                    int timeout_ms = 5000);

// Connected pair over a loopback port (0: ephemeral), for tests and the
// runner.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> TcpPair(
    uint16_t port = 0);

// Component payload: a sequence of blocks
//   family u8 | items u32 | per_item u32 | byte_len u64 | ciphertexts
// where every item holds `per_item` ciphertexts.
struct BlockHeader {
  uint8_t family = 0;
  uint32_t items = 0;
  uint32_t per_item = 0;
  uint64_t byte_len = 0;
};
inline constexpr size_t kBlockHeaderSize = 17;

void AppendBlockHeader(const BlockHeader& h, Bytes& out);
BlockHeader ReadBlockHeader(std::span<const uint8_t> in, size_t& offset);
// Walks the block headers of a component payload.
std::vector<BlockHeader> ListBlocks(std::span<const uint8_t> payload);

// Cost_{B->A} style accounting for one direction of COMPONENTS traffic.
struct CostReport {
  // Ciphertext bytes of the per-sample families (d x d matrices and
  // d-vectors over the labeled set); compare with n (d^2 + d) ct.
  uint64_t per_sample_bytes = 0;
  // Ciphertext bytes of the remaining families (overlap vectors, scalars).
  uint64_t other_bytes = 0;
  uint64_t block_header_bytes = 0;
  // Everything, framing included.
  uint64_t wire_bytes = 0;
  uint64_t frames = 0;

  uint64_t payload_bytes() const {
    return per_sample_bytes + other_bytes + block_header_bytes;
  }
};

// Sums COMPONENTS frames of `type` in direction `dir` of `t`. Families 1 and
// 2 are the per-sample ones.
CostReport MeasureCost(const Transcript& t, Direction dir, MsgType type);

// n (d^2 + d) ct
uint64_t CostFormula(uint64_t n, uint64_t d, uint64_t ct);

}  // namespace ftl::transport

#endif  // FTL_TRANSPORT_H_
