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

#include "ftl/transport.h"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

namespace ftl::transport {
namespace {

constexpr uint8_t kMagic[4] = {'F', 'T', 'L', '1'};

void PutU32(uint32_t v, uint8_t* out) {
  for (int i = 3; i >= 0; --i, v >>= 8) out[i] = static_cast<uint8_t>(v);
}

void PutU64(uint64_t v, uint8_t* out) {
  for (int i = 7; i >= 0; --i, v >>= 8) out[i] = static_cast<uint8_t>(v);
}

uint32_t GetU32(const uint8_t* in) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | in[i];
  return v;
}

uint64_t GetU64(const uint8_t* in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | in[i];
  return v;
}

uint64_t Fnv1a(uint64_t h, std::span<const uint8_t> bytes) {
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

// Unbounded blocking queue of encoded frames.
class FrameQueue {
 public:
  void Push(Bytes b) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      q_.push_back(std::move(b));
    }
    cv_.notify_one();
  }
  std::optional<Bytes> Pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    Bytes b = std::move(q_.front());
    q_.pop_front();
    return b;
  }
  void Close() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  bool closed() {
    std::lock_guard<std::mutex> lock(mu_);
    return closed_;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> q_;
  bool closed_ = false;
};

class LoopbackChannel : public Channel {
 public:
  LoopbackChannel(std::shared_ptr<FrameQueue> in, std::shared_ptr<FrameQueue> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackChannel() override { Close(); }

  void Send(const Frame& f) override {
    if (out_->closed()) throw TransportError("send on closed channel");
    out_->Push(EncodeFrame(f));
    transcript_.Record(Direction::kSent, f);
  }

  std::optional<Frame> Recv() override {
    std::optional<Bytes> b = in_->Pop();
    if (!b) return std::nullopt;
    Frame f = DecodeFrame(*b);
    transcript_.Record(Direction::kReceived, f);
    return f;
  }

  void Close() override {
    in_->Close();
    out_->Close();
  }

 private:
  std::shared_ptr<FrameQueue> in_;
  std::shared_ptr<FrameQueue> out_;
};

bool WriteAll(int fd, const uint8_t* p, size_t n) {
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += w;
    n -= static_cast<size_t>(w);
  }
  return true;
}

// false on EOF or error before `n` bytes arrived.
bool ReadAll(int fd, uint8_t* p, size_t n) {
  while (n > 0) {
    ssize_t r = ::recv(fd, p, n, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += r;
    n -= static_cast<size_t>(r);
  }
  return true;
}

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    reader_ = std::thread([this] { ReadLoop(); });
  }

  ~TcpChannel() override {
    Close();
    if (reader_.joinable()) reader_.join();
    ::close(fd_);
  }

  void Send(const Frame& f) override {
    Bytes wire = EncodeFrame(f);
    std::lock_guard<std::mutex> lock(send_mu_);
    if (send_closed_ || !WriteAll(fd_, wire.data(), wire.size())) {
      throw TransportError("tcp send failed");
    }
    transcript_.Record(Direction::kSent, f);
  }

  std::optional<Frame> Recv() override {
    std::optional<Bytes> b = inbox_.Pop();
    if (!b) {
      std::lock_guard<std::mutex> lock(err_mu_);
      if (!reader_error_.empty()) throw FramingError(reader_error_);
      return std::nullopt;
    }
    Frame f = DecodeFrame(*b);
    transcript_.Record(Direction::kReceived, f);
    return f;
  }

  void Close() override {
    {
      std::lock_guard<std::mutex> lock(send_mu_);
      if (!send_closed_) {
        send_closed_ = true;
        ::shutdown(fd_, SHUT_RDWR);
      }
    }
    inbox_.Close();
  }

 private:
  void ReadLoop() {
    for (;;) {
      Bytes wire(kHeaderSize);
      if (!ReadAll(fd_, wire.data(), kHeaderSize)) break;
      uint64_t len;
      try {
        MsgType t;
        uint32_t it;
        len = ParseHeader(std::span<const uint8_t, kHeaderSize>(wire.data(),
                                                                 kHeaderSize),
                          &t, &it);
      } catch (const FramingError& e) {
        std::lock_guard<std::mutex> lock(err_mu_);
        reader_error_ = e.what();
        break;
      }
      wire.resize(kHeaderSize + len);
      if (!ReadAll(fd_, wire.data() + kHeaderSize, len)) {
        std::lock_guard<std::mutex> lock(err_mu_);
        reader_error_ = "connection closed inside a frame";
        break;
      }
      inbox_.Push(std::move(wire));
    }
    inbox_.Close();
  }

  int fd_;
  std::mutex send_mu_;
  bool send_closed_ = false;
  FrameQueue inbox_;
  std::mutex err_mu_;
  std::string reader_error_;
  std::thread reader_;
};

// Upper bound on a single payload; guards allocation on corrupt headers.
constexpr uint64_t kMaxPayload = uint64_t{1} << 36;

}  // namespace

bool IsValidType(uint8_t t) { return t >= 1 && t <= 11; }

std::string TypeName(MsgType t) {
  switch (t) {
    case MsgType::kPubKey: return "PUBKEY";
    case MsgType::kComponentsA: return "COMPONENTS_A";
    case MsgType::kComponentsB: return "COMPONENTS_B";
    case MsgType::kMaskedGradA: return "MASKED_GRAD_A";
    case MsgType::kMaskedGradB: return "MASKED_GRAD_B";
    case MsgType::kEncLoss: return "ENC_LOSS";
    case MsgType::kDecryptedBlob: return "DECRYPTED_BLOB";
    case MsgType::kStop: return "STOP";
    case MsgType::kPredictRequest: return "PREDICT_REQUEST";
    case MsgType::kPredictMasked: return "PREDICT_MASKED";
    case MsgType::kPredictLabels: return "PREDICT_LABELS";
  }
  return "UNKNOWN";
}

Bytes EncodeFrame(const Frame& f) {
  if (!IsValidType(static_cast<uint8_t>(f.type))) {
    throw FramingError("invalid message type");
  }
  Bytes out(kHeaderSize + f.payload.size());
  std::memcpy(out.data(), kMagic, 4);
  out[4] = static_cast<uint8_t>(f.type);
  PutU32(f.iteration, out.data() + 5);
  PutU64(f.payload.size(), out.data() + 9);
  if (!f.payload.empty()) {
    std::memcpy(out.data() + kHeaderSize, f.payload.data(), f.payload.size());
  }
  return out;
}

uint64_t ParseHeader(std::span<const uint8_t, kHeaderSize> header,
                     MsgType* type, uint32_t* iteration) {
  if (std::memcmp(header.data(), kMagic, 4) != 0) {
    throw FramingError("bad magic");
  }
  if (!IsValidType(header[4])) {
    throw FramingError("unknown message type " + std::to_string(header[4]));
  }
  *type = static_cast<MsgType>(header[4]);
  *iteration = GetU32(header.data() + 5);
  uint64_t len = GetU64(header.data() + 9);
  if (len > kMaxPayload) throw FramingError("payload length too large");
  return len;
}

Frame DecodeFrame(std::span<const uint8_t> in) {
  if (in.size() < kHeaderSize) throw FramingError("truncated header");
  Frame f;
  uint64_t len = ParseHeader(in.first<kHeaderSize>(), &f.type, &f.iteration);
  if (in.size() - kHeaderSize != len) {
    throw FramingError("payload length does not match header");
  }
  f.payload.assign(in.begin() + kHeaderSize, in.end());
  return f;
}

Transcript::Transcript(const Transcript& other) { *this = other; }

Transcript& Transcript::operator=(const Transcript& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  keep_payloads_ = other.keep_payloads_;
  entries_ = other.entries_;
  wire_bytes_ = other.wire_bytes_;
  payload_bytes_ = other.payload_bytes_;
  counts_ = other.counts_;
  hash_ = other.hash_;
  return *this;
}

void Transcript::Record(Direction dir, const Frame& f) {
  Bytes wire = EncodeFrame(f);
  std::lock_guard<std::mutex> lock(mu_);
  const uint8_t d = static_cast<uint8_t>(dir);
  hash_ = Fnv1a(hash_, std::span<const uint8_t>(&d, 1));
  hash_ = Fnv1a(hash_, wire);
  auto key = std::make_pair(dir, f.type);
  wire_bytes_[key] += wire.size();
  payload_bytes_[key] += f.payload.size();
  counts_[key] += 1;
  if (keep_payloads_) {
    entries_.push_back({dir, f});
  } else {
    entries_.push_back({dir, Frame{f.type, f.iteration, {}}});
  }
}

std::vector<TranscriptEntry> Transcript::Entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

uint64_t Transcript::WireBytes(Direction dir) const {
  std::lock_guard<std::mutex> lock(mu_);
  uint64_t total = 0;
  for (const auto& [key, v] : wire_bytes_) {
    if (key.first == dir) total += v;
  }
  return total;
}

namespace {
uint64_t Lookup(const std::map<std::pair<Direction, MsgType>, uint64_t>& m,
                Direction dir, MsgType type) {
  auto it = m.find({dir, type});
  return it == m.end() ? 0 : it->second;
}
}  // namespace

uint64_t Transcript::WireBytes(Direction dir, MsgType type) const {
  std::lock_guard<std::mutex> lock(mu_);
  return Lookup(wire_bytes_, dir, type);
}

uint64_t Transcript::PayloadBytes(Direction dir, MsgType type) const {
  std::lock_guard<std::mutex> lock(mu_);
  return Lookup(payload_bytes_, dir, type);
}

uint64_t Transcript::FrameCount(Direction dir, MsgType type) const {
  std::lock_guard<std::mutex> lock(mu_);
  return Lookup(counts_, dir, type);
}

uint64_t Transcript::Hash() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hash_;
}

void Transcript::Clear() {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.clear();
  wire_bytes_.clear();
  payload_bytes_.clear();
  counts_.clear();
  hash_ = 14695981039346656037ull;
}

Frame Expect(Channel& ch, MsgType type, uint32_t iteration) {
  std::optional<Frame> f = ch.Recv();
  if (!f) {
    throw ProtocolError("channel closed while waiting for " + TypeName(type) +
                        " at iteration " + std::to_string(iteration));
  }
  if (f->type != type || f->iteration != iteration) {
    throw ProtocolError("expected " + TypeName(type) + "@" +
                        std::to_string(iteration) + ", got " +
                        TypeName(f->type) + "@" + std::to_string(f->iteration));
  }
  return std::move(*f);
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> LoopbackPair() {
  auto ab = std::make_shared<FrameQueue>();
  auto ba = std::make_shared<FrameQueue>();
  return {std::make_unique<LoopbackChannel>(ba, ab),
          std::make_unique<LoopbackChannel>(ab, ba)};
}

TcpListener::TcpListener(uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket: " + std::string(strerror(errno)));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(fd_, 1) < 0) {
    std::string err = strerror(errno);
    ::close(fd_);
    throw TransportError("bind/listen on port " + std::to_string(port) + ": " +
                         err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::Accept() {
  int c = ::accept(fd_, nullptr, nullptr);
  if (c < 0) throw TransportError("accept: " + std::string(strerror(errno)));
  return std::make_unique<TcpChannel>(c);
}

std::unique_ptr<Channel> TcpConnect(const std::string& host, uint16_t port,
                                    int timeout_ms) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("bad host address " + host);
  }
  auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket: " + std::string(strerror(errno)));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      return std::make_unique<TcpChannel>(fd);
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() > deadline) {
      throw TransportError("connect to " + host + ":" + std::to_string(port) +
                           " timed out");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> TcpPair(
    uint16_t port) {
  TcpListener listener(port);
  std::unique_ptr<Channel> client;
  std::thread t([&] { client = TcpConnect("127.0.0.1", listener.port()); });
  std::unique_ptr<Channel> server = listener.Accept();
  t.join();
  return {std::move(server), std::move(client)};
}

void AppendBlockHeader(const BlockHeader& h, Bytes& out) {
  size_t at = out.size();
  out.resize(at + kBlockHeaderSize);
  out[at] = h.family;
  PutU32(h.items, out.data() + at + 1);
  PutU32(h.per_item, out.data() + at + 5);
  PutU64(h.byte_len, out.data() + at + 9);
}

BlockHeader ReadBlockHeader(std::span<const uint8_t> in, size_t& offset) {
  if (in.size() < offset + kBlockHeaderSize) {
    throw FramingError("truncated block header");
  }
  const uint8_t* p = in.data() + offset;
  BlockHeader h{p[0], GetU32(p + 1), GetU32(p + 5), GetU64(p + 9)};
  offset += kBlockHeaderSize;
  if (in.size() - offset < h.byte_len) throw FramingError("truncated block");
  return h;
}

std::vector<BlockHeader> ListBlocks(std::span<const uint8_t> payload) {
  std::vector<BlockHeader> out;
  size_t off = 0;
  while (off < payload.size()) {
    out.push_back(ReadBlockHeader(payload, off));
    off += out.back().byte_len;
  }
  return out;
}

CostReport MeasureCost(const Transcript& t, Direction dir, MsgType type) {
  CostReport r;
  for (const TranscriptEntry& e : t.Entries()) {
    if (e.direction != dir || e.frame.type != type) continue;
    r.frames += 1;
    r.wire_bytes += e.frame.WireSize();
    for (const BlockHeader& h : ListBlocks(e.frame.payload)) {
      r.block_header_bytes += kBlockHeaderSize;
      if (h.family == 1 || h.family == 2) {
        r.per_sample_bytes += h.byte_len;
      } else {
        r.other_bytes += h.byte_len;
      }
    }
  }
  return r;
}

uint64_t CostFormula(uint64_t n, uint64_t d, uint64_t ct) {
  return n * (d * d + d) * ct;
}

}  // namespace ftl::transport
