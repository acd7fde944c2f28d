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

#include <condition_variable>
#include <deque>
#include <mutex>

#include "salientgrads/errors.hpp"
#include "salientgrads/transport.hpp"

namespace salientgrads {
namespace {

class Queue {
 public:
  void push(wire::Bytes frame) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) throw TransportError("transport aborted");
      frames_.push_back(std::move(frame));
    }
    ready_.notify_one();
  }

  wire::Bytes pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [this] { return closed_ || !frames_.empty(); });
    if (closed_) throw TransportError("transport aborted");
    wire::Bytes frame = std::move(frames_.front());
    frames_.pop_front();
    return frame;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    ready_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<wire::Bytes> frames_;
  bool closed_ = false;
};

class MemoryTransport final : public Transport {
 public:
  explicit MemoryTransport(std::size_t clients)
      : Transport(clients), up_(clients), down_(clients) {}

  void abort() override {
    for (Queue& q : up_) q.close();
    for (Queue& q : down_) q.close();
  }

 protected:
  void write_frame(Direction direction, std::size_t client,
                   wire::Bytes frame) override {
    queue(direction, client).push(std::move(frame));
  }

  wire::Bytes read_frame(Direction direction, std::size_t client) override {
    return queue(direction, client).pop();
  }

 private:
  Queue& queue(Direction direction, std::size_t client) {
    return direction == Direction::kUp ? up_[client] : down_[client];
  }

  std::vector<Queue> up_;
  std::vector<Queue> down_;
};

}  // namespace

std::unique_ptr<Transport> make_memory_transport(std::size_t clients) {
  return std::make_unique<MemoryTransport>(clients);
}

}  // namespace salientgrads
