// Copyright 2026 The SalientGrads Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "salientgrads/wire.hpp"

namespace salientgrads {

/// First byte of every frame.
enum class MessageType : std::uint8_t {
  kParams = 0,
  kScores = 1,
  kMask = 2,
  kSparseGrad = 3,
  kDenseGrad = 4,
  kHashAck = 5,
};

std::string_view to_string(MessageType type);

/// kUp is client -> server, kDown is server -> client.
enum class Direction : std::uint8_t { kUp, kDown };

struct Message {
  MessageType type = MessageType::kParams;
  wire::Bytes payload;
};

struct TrafficRecord {
  MessageType type;
  Direction direction;
  std::size_t client;
  std::size_t bytes;
};

struct TrafficTotals {
  std::uint64_t up = 0;
  std::uint64_t down = 0;
};

/// Reliable, ordered star network between one server and N clients. One
/// logical link per client, each carrying an up and a down stream.
///
/// The base class does framing (u8 type tag + payload), byte accounting, and
/// the message-type log; counters track payload bytes, excluding the tag and
/// any transport-level length prefix. Distinct links may be used from
/// different threads concurrently.
class Transport {
 public:
  explicit Transport(std::size_t clients) : clients_(clients) {}
  virtual ~Transport() = default;

  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  std::size_t clients() const { return clients_; }

  /// Sends on link `client` in `direction` (kUp: from that client).
  void send(Direction direction, std::size_t client, const Message& msg);
  /// Blocks for the next frame on link `client` travelling in `direction`.
  Message receive(Direction direction, std::size_t client);

  /// Unblocks every pending and future receive with TransportError.
  virtual void abort() = 0;

  TrafficTotals totals() const { return {up_bytes_.load(), down_bytes_.load()}; }
  std::vector<TrafficRecord> log() const;
  std::size_t log_size() const;

 protected:
  virtual void write_frame(Direction direction, std::size_t client,
                           wire::Bytes frame) = 0;
  virtual wire::Bytes read_frame(Direction direction, std::size_t client) = 0;

  void check_client(std::size_t client) const;

 private:
  std::size_t clients_;
  std::atomic<std::uint64_t> up_bytes_{0};
  std::atomic<std::uint64_t> down_bytes_{0};
  mutable std::mutex log_mutex_;
  std::vector<TrafficRecord> log_;
};

enum class TransportKind { kMemory, kLoopback };

/// In-process queues; zero latency and deterministic.
std::unique_ptr<Transport> make_memory_transport(std::size_t clients);
/// One TCP connection per client over 127.0.0.1, u32 length-prefixed frames.
std::unique_ptr<Transport> make_loopback_transport(std::size_t clients);
std::unique_ptr<Transport> make_transport(TransportKind kind, std::size_t clients);

}  // namespace salientgrads
