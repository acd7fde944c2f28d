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

#include "salientgrads/transport.hpp"

#include <fmt/format.h>

#include "salientgrads/errors.hpp"

namespace salientgrads {

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::kParams: return "params";
    case MessageType::kScores: return "scores";
    case MessageType::kMask: return "mask";
    case MessageType::kSparseGrad: return "sparse-grad";
    case MessageType::kDenseGrad: return "dense-grad";
    case MessageType::kHashAck: return "hash-ack";
  }
  return "unknown";
}

void Transport::check_client(std::size_t client) const {
  if (client >= clients_) {
    throw TransportError(fmt::format("no link for client {}", client));
  }
}

void Transport::send(Direction direction, std::size_t client,
                     const Message& msg) {
  check_client(client);
  wire::Bytes frame;
  frame.reserve(1 + msg.payload.size());
  frame.push_back(static_cast<std::uint8_t>(msg.type));
  frame.insert(frame.end(), msg.payload.begin(), msg.payload.end());
  write_frame(direction, client, std::move(frame));

  const std::size_t bytes = msg.payload.size();
  (direction == Direction::kUp ? up_bytes_ : down_bytes_) += bytes;
  std::lock_guard lock(log_mutex_);
  log_.push_back({msg.type, direction, client, bytes});
}

Message Transport::receive(Direction direction, std::size_t client) {
  check_client(client);
  wire::Bytes frame = read_frame(direction, client);
  if (frame.empty()) throw TransportError("empty frame");
  const std::uint8_t tag = frame.front();
  if (tag > static_cast<std::uint8_t>(MessageType::kHashAck)) {
    throw TransportError(fmt::format("unknown message tag {}", tag));
  }
  Message msg{static_cast<MessageType>(tag), {}};
  msg.payload.assign(frame.begin() + 1, frame.end());
  return msg;
}

std::vector<TrafficRecord> Transport::log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::size_t Transport::log_size() const {
  std::lock_guard lock(log_mutex_);
  return log_.size();
}

std::unique_ptr<Transport> make_transport(TransportKind kind,
                                          std::size_t clients) {
  switch (kind) {
    case TransportKind::kMemory: return make_memory_transport(clients);
    case TransportKind::kLoopback: return make_loopback_transport(clients);
  }
  throw ConfigError("unknown transport kind");
}

}  // namespace salientgrads
