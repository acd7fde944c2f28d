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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "salientgrads/dataset.hpp"
#include "salientgrads/masking.hpp"
#include "salientgrads/nn.hpp"
#include "salientgrads/sparse_codec.hpp"
#include "salientgrads/transport.hpp"

namespace salientgrads::fed {

enum class Protocol { kSalient, kFedAvg };

std::string_view to_string(Protocol p);

struct SessionConfig {
  nn::Architecture arch;
  double sparsity = 0.9;
  std::size_t saliency_batches = 10;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  WireMode wire = WireMode::kFull;
};

/// Per-client minibatch schedule. Each epoch is a fresh permutation of the
/// client's training rows drawn from (seed, epoch); the trailing partial
/// batch is dropped.
class BatchStream {
 public:
  BatchStream() = default;
  BatchStream(std::size_t train_size, std::size_t batch_size,
              std::size_t steps_per_epoch, std::uint64_t seed);

  nn::Batch next(const data::Dataset& train);
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  void reshuffle();

  std::size_t batch_size_ = 1;
  std::size_t steps_per_epoch_ = 1;
  std::uint64_t seed_ = 0;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
  std::vector<std::size_t> order_;
};

struct ClientState {
  std::size_t id = 0;
  nn::ParamVector params;
  std::optional<GlobalMask> mask;
  data::DatasetSplit data;
  std::uint64_t seed = 0;
  BatchStream batches;
  bool sent_indices = false;
};

struct ServerState {
  nn::ParamVector params;
  nn::ParamVector initial;
  std::uint64_t init_hash = 0;
  std::optional<GlobalMask> mask;
  std::size_t roster = 0;
  std::vector<bool> sent_indices;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  /// Server side: first receive-wait to last send-complete.
  double comm_seconds = 0.0;
  /// Server side: first receive-wait to last gradient received.
  double gather_seconds = 0.0;
  std::optional<double> mean_test_acc;
  std::vector<double> client_test_acc;
};

/// Server, clients, and the link between them for one training session.
struct Session {
  SessionConfig config;
  ServerState server;
  std::vector<ClientState> clients;
  Transport* transport = nullptr;
  std::size_t steps_per_epoch = 0;
  std::size_t rounds_done = 0;
  bool mask_phase_done = false;
  /// Transport log length when the first training round started.
  std::optional<std::size_t> training_log_start;
  TrafficTotals training_start_totals;

  std::size_t n_clients() const { return clients.size(); }
};

/// Server draws theta_0, broadcasts it, and checks every client's echoed
/// content hash. Throws VerificationError on any mismatch.
Session setup_session(const SessionConfig& config,
                      std::vector<data::DatasetSplit> splits,
                      Transport& transport);

/// One-time score collection, global top-k, and mask broadcast.
const GlobalMask& mask_phase(Session& session);

/// One synchronized step exchanging masked sparse gradients.
RoundMetrics training_round_salient(Session& session, double lr);

/// One synchronized step exchanging dense gradients.
RoundMetrics training_round_fedavg(Session& session, double lr);

RoundMetrics training_round(Session& session, Protocol protocol, double lr);

/// Stepped schedule: x0.1 from the halfway epoch, x0.01 from three quarters.
double scheduled_lr(double base_lr, std::size_t epoch, std::size_t epochs);

using RoundCallback = std::function<void(const RoundMetrics&)>;

/// Runs epochs x steps_per_epoch rounds, evaluating every client's test split
/// at the end of each epoch.
std::vector<RoundMetrics> run_training(Session& session, std::size_t epochs,
                                       double base_lr, Protocol protocol,
                                       const RoundCallback& on_round = {});

/// Per-client accuracy on the held-out test split.
std::vector<double> evaluate_clients(const Session& session);

/// Coordinate-wise mean over clients, summed in the given order.
std::vector<double> average_rows(std::span<const std::vector<float>> rows);

/// True when every client's and the server's parameters are bitwise equal.
bool replicas_identical(const Session& session);

}  // namespace salientgrads::fed
