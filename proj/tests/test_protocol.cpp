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

#include <doctest.h>

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>

#include "salientgrads/errors.hpp"
#include "salientgrads/protocol.hpp"
#include "test_support.hpp"

using namespace salientgrads;
using sg_test::bitwise_equal;

namespace {

// In-memory links that flip one byte of the first params frame sent to
// `victim`.
class TamperingTransport : public Transport {
 public:
  TamperingTransport(std::size_t clients, std::size_t victim)
      : Transport(clients), victim_(victim) {}

  void abort() override {
    std::lock_guard lock(mutex_);
    aborted_ = true;
    cv_.notify_all();
  }

 protected:
  void write_frame(Direction dir, std::size_t client, wire::Bytes frame) override {
    if (dir == Direction::kDown && client == victim_ && !tampered_ &&
        frame.front() == static_cast<std::uint8_t>(MessageType::kParams)) {
      frame.back() ^= 0x01;
      tampered_ = true;
    }
    std::lock_guard lock(mutex_);
    queues_[{dir, client}].push_back(std::move(frame));
    cv_.notify_all();
  }

  wire::Bytes read_frame(Direction dir, std::size_t client) override {
    std::unique_lock lock(mutex_);
    auto& q = queues_[{dir, client}];
    cv_.wait(lock, [&] { return aborted_ || !q.empty(); });
    if (q.empty()) throw TransportError("aborted");
    wire::Bytes f = std::move(q.front());
    q.pop_front();
    return f;
  }

 private:
  std::size_t victim_;
  bool tampered_ = false;
  bool aborted_ = false;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::pair<Direction, std::size_t>, std::deque<wire::Bytes>> queues_;
};

fed::SessionConfig small_config(double sparsity = 0.9) {
  fed::SessionConfig c;
  c.arch = nn::Architecture::mlp({6, 12, 3});
  c.sparsity = sparsity;
  c.saliency_batches = 3;
  c.batch_size = 8;
  c.seed = 11;
  return c;
}

std::vector<data::DatasetSplit> splits(std::size_t n) {
  return sg_test::blob_splits(n, 120 * n, 6, 3, 3.0, 5);
}

std::size_t count_type(const Transport& t, MessageType type, std::size_t from = 0) {
  const auto log = t.log();
  std::size_t c = 0;
  for (std::size_t i = from; i < log.size(); ++i) c += log[i].type == type;
  return c;
}

}  // namespace

TEST_CASE("setup broadcasts identical parameters and verifies hashes") {
  const std::size_t n = 3;
  auto t = make_memory_transport(n);
  auto s = fed::setup_session(small_config(), splits(n), *t);
  const std::size_t d = s.server.params.size();
  CHECK(d == 6 * 12 + 12 + 12 * 3 + 3);
  for (const auto& c : s.clients) CHECK(bitwise_equal(c.params.values, s.server.initial.values));
  CHECK(fed::replicas_identical(s));
  CHECK(t->totals().down == n * (8 + 4 * d));
  CHECK(t->totals().up == n * 8);
  CHECK(count_type(*t, MessageType::kParams) == n);
  CHECK(count_type(*t, MessageType::kHashAck) == n);
}

TEST_CASE("corrupted initialization fails verification") {
  TamperingTransport t(3, 1);
  CHECK_THROWS_AS(fed::setup_session(small_config(), splits(3), t), VerificationError);
}

TEST_CASE("setup rejects mismatched client counts and oversize batches") {
  auto t = make_memory_transport(2);
  CHECK_THROWS_AS(fed::setup_session(small_config(), splits(3), *t), ConfigError);
  auto cfg = small_config();
  cfg.batch_size = 10000;
  auto t3 = make_memory_transport(3);
  CHECK_THROWS_AS(fed::setup_session(cfg, splits(3), *t3), ConfigError);
}

TEST_CASE("mask phase traffic and agreement") {
  const std::size_t n = 4;
  auto t = make_memory_transport(n);
  auto s = fed::setup_session(small_config(), splits(n), *t);
  const std::size_t d = s.server.params.size();
  const auto before = t->totals();
  const GlobalMask& m = fed::mask_phase(s);
  CHECK(t->totals().up - before.up == n * (12 + 4 * d));
  CHECK(t->totals().down - before.down == n * mask_payload_bytes(m.count()));
  CHECK(m.maskable_active == kept_count(m.maskable_total, 0.9));
  for (const auto& c : s.clients) {
    REQUIRE(c.mask.has_value());
    CHECK(c.mask->active_indices == m.active_indices);
  }
  CHECK(count_type(*t, MessageType::kScores) == n);
  CHECK(count_type(*t, MessageType::kMask) == n);
  CHECK_THROWS_AS(fed::mask_phase(s), Error);
}

TEST_CASE("salient round needs a mask") {
  auto t = make_memory_transport(2);
  auto s = fed::setup_session(small_config(), splits(2), *t);
  CHECK_THROWS_AS(fed::training_round_salient(s, 0.1), Error);
  CHECK_THROWS_AS(fed::training_round_fedavg(s, 0.0), ConfigError);
}

TEST_CASE("average_rows") {
  const std::vector<std::vector<float>> rows{{1, 2}, {3, 4}};
  CHECK(fed::average_rows(rows) == std::vector<double>{2, 3});
  const std::vector<std::vector<float>> one{{0.5f, -1.0f}};
  CHECK(fed::average_rows(one) == std::vector<double>{0.5, -1.0});
  const std::vector<std::vector<float>> ragged{{1, 2}, {3}};
  CHECK_THROWS_AS(fed::average_rows(ragged), DimensionError);
}

TEST_CASE("round byte accounting") {
  const std::size_t n = 3;
  for (WireMode mode : {WireMode::kFull, WireMode::kValuesOnly}) {
    auto cfg = small_config();
    cfg.wire = mode;
    auto t = make_memory_transport(n);
    auto s = fed::setup_session(cfg, splits(n), *t);
    const GlobalMask& m = fed::mask_phase(s);
    const std::size_t nnz = m.count();
    const auto r0 = fed::training_round_salient(s, 0.1);
    CHECK(r0.bytes_up == n * (12 + 8 * nnz));
    CHECK(r0.bytes_down == n * (12 + 8 * nnz));
    const auto r1 = fed::training_round_salient(s, 0.1);
    const std::size_t later = mode == WireMode::kFull ? 12 + 8 * nnz : 12 + 4 * nnz;
    CHECK(r1.bytes_up == n * later);
    CHECK(r1.bytes_down == n * later);
    CHECK(fed::replicas_identical(s));
  }

  auto t = make_memory_transport(n);
  auto s = fed::setup_session(small_config(), splits(n), *t);
  const std::size_t d = s.server.params.size();
  const auto r = fed::training_round_fedavg(s, 0.1);
  CHECK(r.bytes_up == n * (8 + 4 * d));
  CHECK(r.bytes_down == n * (8 + 4 * d));
  CHECK(r.round == 0);
  CHECK(fed::training_round_fedavg(s, 0.1).round == 1);
}

TEST_CASE("zero sparsity makes both protocols coincide") {
  const std::size_t n = 3;
  auto ta = make_memory_transport(n);
  auto tb = make_memory_transport(n);
  auto a = fed::setup_session(small_config(0.0), splits(n), *ta);
  auto b = fed::setup_session(small_config(0.0), splits(n), *tb);
  fed::mask_phase(a);
  for (int r = 0; r < 20; ++r) {
    fed::training_round_salient(a, 0.05);
    fed::training_round_fedavg(b, 0.05);
    REQUIRE(bitwise_equal(a.server.params.values, b.server.params.values));
  }
  CHECK(fed::replicas_identical(a));
  CHECK(fed::replicas_identical(b));
}

TEST_CASE("a single client reproduces sequential SGD at wire precision") {
  for (fed::Protocol p : {fed::Protocol::kSalient, fed::Protocol::kFedAvg}) {
    auto t = make_memory_transport(1);
    auto s = fed::setup_session(small_config(0.0), splits(1), *t);
    if (p == fed::Protocol::kSalient) fed::mask_phase(s);
    fed::BatchStream stream = s.clients[0].batches;
    nn::ParamVector ref = s.server.initial;
    for (int r = 0; r < 15; ++r) {
      const auto batch = stream.next(s.clients[0].data.train);
      const auto g = nn::backward(ref, s.config.arch, batch);
      ref = nn::apply_update(ref, to_wire_precision(g), 0.1);
      fed::training_round(s, p, 0.1);
    }
    CHECK(bitwise_equal(ref.values, s.server.params.values));
  }
}

TEST_CASE("replicas stay synchronized and inactive weights stay frozen") {
  const std::size_t n = 3;
  auto t = make_memory_transport(n);
  auto s = fed::setup_session(small_config(0.9), splits(n), *t);
  const GlobalMask& m = fed::mask_phase(s);
  for (int r = 0; r < 30; ++r) {
    fed::training_round_salient(s, 0.1);
    REQUIRE(fed::replicas_identical(s));
  }
  std::size_t moved = 0;
  for (std::size_t j = 0; j < s.server.params.size(); ++j) {
    if (!m.bits[j]) {
      CHECK(s.server.params.values[j] == s.server.initial.values[j]);
    } else {
      moved += s.server.params.values[j] != s.server.initial.values[j];
    }
  }
  CHECK(moved > 0);
  CHECK(count_type(*t, MessageType::kScores, *s.training_log_start) == 0);
  CHECK(count_type(*t, MessageType::kMask, *s.training_log_start) == 0);
}

TEST_CASE("stepped learning-rate schedule") {
  CHECK(fed::scheduled_lr(0.1, 0, 100) == 0.1);
  CHECK(fed::scheduled_lr(0.1, 49, 100) == 0.1);
  CHECK(fed::scheduled_lr(0.1, 50, 100) == doctest::Approx(0.01));
  CHECK(fed::scheduled_lr(0.1, 74, 100) == doctest::Approx(0.01));
  CHECK(fed::scheduled_lr(0.1, 75, 100) == doctest::Approx(0.001));
  CHECK(fed::scheduled_lr(0.1, 99, 100) == doctest::Approx(0.001));
  CHECK(fed::scheduled_lr(0.2, 0, 1) == 0.2);
}

TEST_CASE("run_training produces one metric per round and evaluates per epoch") {
  const std::size_t n = 2;
  auto t = make_memory_transport(n);
  auto s = fed::setup_session(small_config(), splits(n), *t);
  fed::mask_phase(s);
  CHECK(fed::run_training(s, 0, 0.1, fed::Protocol::kSalient).empty());

  std::size_t seen = 0;
  std::uint64_t up = 0, down = 0;
  const auto before = t->totals();
  const auto metrics = fed::run_training(s, 4, 0.1, fed::Protocol::kSalient,
                                         [&](const fed::RoundMetrics& m) {
                                           ++seen;
                                           up += m.bytes_up;
                                           down += m.bytes_down;
                                         });
  CHECK(metrics.size() == 4 * s.steps_per_epoch);
  CHECK(seen == metrics.size());
  CHECK(up == t->totals().up - before.up);
  CHECK(down == t->totals().down - before.down);
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const bool last = (i + 1) % s.steps_per_epoch == 0;
    CHECK(metrics[i].mean_test_acc.has_value() == last);
    CHECK(metrics[i].epoch == i / s.steps_per_epoch);
    CHECK(metrics[i].lr == fed::scheduled_lr(0.1, metrics[i].epoch, 4));
    CHECK(metrics[i].comm_seconds >= metrics[i].gather_seconds);
  }
  CHECK(metrics.back().client_test_acc.size() == n);
}
