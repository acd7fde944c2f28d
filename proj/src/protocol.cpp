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

#include "salientgrads/protocol.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cstring>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "salientgrads/errors.hpp"
#include "salientgrads/rng.hpp"
#include "salientgrads/saliency.hpp"

namespace salientgrads::fed {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kBatchStream = 0xba7c4;
constexpr std::uint64_t kSaliencyStream = 0x5a11e;

// Keeps the first error raised by any participant of an exchange.
class FirstError {
 public:
  void record(std::exception_ptr e) {
    std::lock_guard lock(mutex_);
    if (!first_) first_ = std::move(e);
  }
  void rethrow() const {
    if (first_) std::rethrow_exception(first_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr first_;
};

// Runs one client body per worker thread and the server body on the calling
// thread. Any failure aborts the transport so blocked peers unwind, and the
// earliest error is rethrown after every worker has joined.
template <typename ClientFn, typename ServerFn>
void exchange(Transport& transport, std::size_t n, ClientFn&& client,
              ServerFn&& server) {
  FirstError errors;
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      workers.emplace_back([&, i] {
        try {
          client(i);
        } catch (...) {
          errors.record(std::current_exception());
          transport.abort();
        }
      });
    }
    try {
      server();
    } catch (...) {
      errors.record(std::current_exception());
      transport.abort();
    }
  }
  errors.rethrow();
}

Message expect(Transport& t, Direction dir, std::size_t client,
               MessageType type) {
  Message m = t.receive(dir, client);
  if (m.type != type) {
    throw TransportError(fmt::format("client {}: expected {} message, got {}",
                                     client, to_string(type), to_string(m.type)));
  }
  return m;
}

bool has_magic(std::span<const std::uint8_t> payload, std::string_view magic) {
  return payload.size() >= magic.size() &&
         std::equal(magic.begin(), magic.end(), payload.begin(),
                    [](char c, std::uint8_t b) { return static_cast<std::uint8_t>(c) == b; });
}

SparseGrad parse_gradient(std::span<const std::uint8_t> payload,
                          const GlobalMask& mask) {
  SparseGrad sg = has_magic(payload, "SGGV") ? parse_values_only(payload, mask)
                                             : parse_sparse(payload);
  if (sg.dense_len != mask.size() || sg.indices != mask.active_indices) {
    throw FormatError("sparse gradient does not follow the session mask");
  }
  return sg;
}

wire::Bytes encode_for_wire(const SparseGrad& sg, WireMode mode,
                            bool indices_known) {
  if (mode == WireMode::kValuesOnly && indices_known) {
    return serialize_values_only(sg);
  }
  return serialize(sg);
}

nn::Batch saliency_batch(const data::Dataset& train, std::span<const std::size_t> order,
                         std::size_t batch_index, std::size_t batch_size) {
  std::vector<std::size_t> rows(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    rows[k] = order[(batch_index * batch_size + k) % order.size()];
  }
  return train.gather(rows);
}

void mark_training_start(Session& s) {
  if (!s.training_log_start) {
    s.training_log_start = s.transport->log_size();
    s.training_start_totals = s.transport->totals();
  }
}

double seconds(Clock::duration d) {
  return std::chrono::duration<double>(d).count();
}

}  // namespace

std::string_view to_string(Protocol p) {
  return p == Protocol::kSalient ? "salient" : "fedavg";
}

BatchStream::BatchStream(std::size_t train_size, std::size_t batch_size,
                         std::size_t steps_per_epoch, std::uint64_t seed)
    : batch_size_(batch_size),
      steps_per_epoch_(steps_per_epoch),
      seed_(seed),
      order_(train_size) {
  if (batch_size == 0 || steps_per_epoch == 0 ||
      steps_per_epoch * batch_size > train_size) {
    throw ConfigError("batch schedule does not fit the training split");
  }
  reshuffle();
}

void BatchStream::reshuffle() {
  std::iota(order_.begin(), order_.end(), 0);
  Rng rng(Rng::derive(seed_, epoch_));
  rng.shuffle(std::span<std::size_t>(order_));
}

nn::Batch BatchStream::next(const data::Dataset& train) {
  if (step_ == steps_per_epoch_) {
    ++epoch_;
    step_ = 0;
    reshuffle();
  }
  auto rows = std::span<const std::size_t>(order_).subspan(step_ * batch_size_,
                                                           batch_size_);
  ++step_;
  return train.gather(rows);
}

Session setup_session(const SessionConfig& config,
                      std::vector<data::DatasetSplit> splits,
                      Transport& transport) {
  config.arch.validate();
  if (splits.empty()) throw ConfigError("need at least one client");
  if (transport.clients() != splits.size()) {
    throw ConfigError(fmt::format("transport has {} links for {} clients",
                                  transport.clients(), splits.size()));
  }
  if (config.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (config.saliency_batches == 0) throw ConfigError("saliency batches must be >= 1");
  kept_count(1, config.sparsity);  // range check

  std::size_t min_train = SIZE_MAX;
  for (const data::DatasetSplit& s : splits) {
    if (s.train.size() == 0 || s.test.size() == 0) {
      throw ConfigError(fmt::format("client {} has an empty train or test split",
                                    s.client));
    }
    if (s.train.dims != config.arch.input_dim) {
      throw ConfigError(fmt::format("client {} data has {} features, model expects {}",
                                    s.client, s.train.dims, config.arch.input_dim));
    }
    min_train = std::min(min_train, s.train.size());
  }

  Session session;
  session.config = config;
  session.transport = &transport;
  session.steps_per_epoch = min_train / config.batch_size;
  if (session.steps_per_epoch == 0) {
    throw ConfigError(fmt::format(
        "batch size {} exceeds the smallest client training split ({})",
        config.batch_size, min_train));
  }

  const std::size_t n = splits.size();
  session.server.roster = n;
  session.server.sent_indices.assign(n, false);
  session.server.initial = nn::init_model(config.arch, config.seed);
  session.server.params = session.server.initial;
  const wire::Bytes broadcast = serialize_dense(session.server.initial.values);
  session.server.init_hash = wire::fnv1a(broadcast);

  session.clients.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ClientState& c = session.clients[i];
    c.id = i;
    c.seed = Rng::derive(config.seed, i + 1);
    c.data = std::move(splits[i]);
    c.batches = BatchStream(c.data.train.size(), config.batch_size,
                            session.steps_per_epoch,
                            Rng::derive(c.seed, kBatchStream));
  }

  const nn::Manifest manifest(config.arch);
  exchange(
      transport, n,
      [&](std::size_t i) {
        Message m = expect(transport, Direction::kDown, i, MessageType::kParams);
        ClientState& c = session.clients[i];
        c.params = nn::ParamVector{parse_dense(m.payload), manifest};
        if (c.params.size() != manifest.total_size()) {
          throw VerificationError(fmt::format(
              "client {} received {} parameters, expected {}", i,
              c.params.size(), manifest.total_size()));
        }
        wire::Writer ack(8);
        ack.u64(wire::fnv1a(serialize_dense(c.params.values)));
        transport.send(Direction::kUp, i, {MessageType::kHashAck, std::move(ack).take()});
      },
      [&] {
        for (std::size_t i = 0; i < n; ++i) {
          transport.send(Direction::kDown, i, {MessageType::kParams, broadcast});
        }
        for (std::size_t i = 0; i < n; ++i) {
          Message m = expect(transport, Direction::kUp, i, MessageType::kHashAck);
          wire::Reader r(m.payload);
          const std::uint64_t hash = r.u64();
          r.expect_end();
          if (hash != session.server.init_hash) {
            throw VerificationError(fmt::format(
                "client {} initialization hash {:016x} != server {:016x}", i,
                hash, session.server.init_hash));
          }
        }
      });
  spdlog::debug("session ready: {} clients, d={}, {} steps/epoch", n,
                manifest.total_size(), session.steps_per_epoch);
  return session;
}

const GlobalMask& mask_phase(Session& session) {
  if (session.mask_phase_done) throw Error("mask phase already ran for this session");
  if (session.training_log_start) {
    throw Error("mask phase must run before training starts");
  }
  Transport& transport = *session.transport;
  const SessionConfig& cfg = session.config;
  const std::size_t n = session.n_clients();
  const nn::Manifest& manifest = session.server.initial.manifest;

  exchange(
      transport, n,
      [&](std::size_t i) {
        ClientState& c = session.clients[i];
        const data::Dataset& train = c.data.train;
        std::vector<std::size_t> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(Rng::derive(c.seed, kSaliencyStream));
        rng.shuffle(std::span<std::size_t>(order));
        const std::size_t batch = std::min(cfg.batch_size, train.size());
        std::vector<nn::Batch> batches;
        for (std::size_t b = 0; b < cfg.saliency_batches; ++b) {
          batches.push_back(saliency_batch(train, order, b, batch));
        }
        const SaliencyScores s = compute_saliency(c.params, cfg.arch, batches);
        transport.send(Direction::kUp, i, {MessageType::kScores, serialize_scores(s)});

        Message m = expect(transport, Direction::kDown, i, MessageType::kMask);
        c.mask = parse_mask(m.payload, c.params.manifest);
      },
      [&] {
        std::vector<SaliencyScores> all;
        all.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
          Message m = expect(transport, Direction::kUp, i, MessageType::kScores);
          SaliencyScores s = parse_scores(m.payload);
          if (s.size() != manifest.total_size()) {
            throw DimensionError(fmt::format("client {} sent {} scores, expected {}",
                                             i, s.size(), manifest.total_size()));
          }
          all.push_back(std::move(s));
        }
        const SaliencyScores global = aggregate_scores(all);
        session.server.mask = topk_mask(global, manifest, cfg.sparsity);
        const wire::Bytes payload = serialize_mask(*session.server.mask);
        for (std::size_t i = 0; i < n; ++i) {
          transport.send(Direction::kDown, i, {MessageType::kMask, payload});
        }
      });
  session.mask_phase_done = true;
  spdlog::debug("mask ready: {} of {} maskable kept ({} active overall)",
                session.server.mask->maskable_active,
                session.server.mask->maskable_total, session.server.mask->count());
  return *session.server.mask;
}

std::vector<double> average_rows(std::span<const std::vector<float>> rows) {
  if (rows.empty()) throw DimensionError("nothing to average");
  const std::size_t width = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != width) throw DimensionError("gradient lengths differ across clients");
  }
  const double n = static_cast<double>(rows.size());
  std::vector<double> out(width);
  for (std::size_t k = 0; k < width; ++k) {
    double acc = 0.0;
    for (const auto& r : rows) acc += r[k];
    out[k] = acc / n;
  }
  return out;
}

RoundMetrics training_round(Session& session, Protocol protocol, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  const bool salient = protocol == Protocol::kSalient;
  if (salient && !session.server.mask) {
    throw Error("salient rounds need the mask phase first");
  }
  if (session.server.roster != session.n_clients()) {
    throw Error("client count differs from the server roster");
  }
  mark_training_start(session);
  Transport& transport = *session.transport;
  const SessionConfig& cfg = session.config;
  const std::size_t n = session.n_clients();
  const WireMode wire_mode = cfg.wire;
  const TrafficTotals before = transport.totals();

  std::vector<double> losses(n, 0.0);
  std::vector<std::exception_ptr> compute_errors(n);
  std::vector<wire::Bytes> outgoing(n);
  std::barrier sync(static_cast<std::ptrdiff_t>(n + 1));
  Clock::time_point t0, t_gathered, t_done;

  exchange(
      transport, n,
      [&](std::size_t i) {
        ClientState& c = session.clients[i];
        try {
          const nn::Batch batch = c.batches.next(c.data.train);
          nn::LossAndGradient lg = nn::loss_and_gradient(c.params, cfg.arch, batch);
          losses[i] = lg.loss;
          if (salient) {
            outgoing[i] = encode_for_wire(encode(lg.grad, *c.mask), wire_mode,
                                          c.sent_indices);
          } else {
            outgoing[i] = serialize_dense(lg.grad.values);
          }
        } catch (...) {
          compute_errors[i] = std::current_exception();
        }
        sync.arrive_and_wait();
        if (compute_errors[i]) return;

        transport.send(Direction::kUp, i,
                       {salient ? MessageType::kSparseGrad : MessageType::kDenseGrad,
                        std::move(outgoing[i])});
        c.sent_indices = true;

        nn::GradVector update;
        if (salient) {
          Message m = expect(transport, Direction::kDown, i, MessageType::kSparseGrad);
          update = decode(parse_gradient(m.payload, *c.mask));
        } else {
          Message m = expect(transport, Direction::kDown, i, MessageType::kDenseGrad);
          update.values = parse_dense(m.payload);
        }
        nn::apply_update_in_place(c.params, update, lr);
      },
      [&] {
        sync.arrive_and_wait();
        for (const auto& e : compute_errors) {
          if (e) std::rethrow_exception(e);
        }
        t0 = Clock::now();
        const std::size_t d = session.server.params.size();
        std::vector<std::vector<float>> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
          if (salient) {
            Message m = expect(transport, Direction::kUp, i, MessageType::kSparseGrad);
            rows[i] = parse_gradient(m.payload, *session.server.mask).values;
          } else {
            Message m = expect(transport, Direction::kUp, i, MessageType::kDenseGrad);
            const std::vector<double> dense = parse_dense(m.payload);
            if (dense.size() != d) throw DimensionError("dense gradient length mismatch");
            rows[i].assign(dense.begin(), dense.end());
          }
        }
        t_gathered = Clock::now();

        const std::vector<double> mean = average_rows(rows);
        wire::Bytes reply_full;
        wire::Bytes reply_values;
        nn::GradVector applied;
        if (salient) {
          SparseGrad agg;
          agg.dense_len = d;
          agg.indices = session.server.mask->active_indices;
          agg.values.assign(mean.begin(), mean.end());
          reply_full = serialize(agg);
          if (wire_mode == WireMode::kValuesOnly) reply_values = serialize_values_only(agg);
          applied = decode(agg);
        } else {
          reply_full = serialize_dense(mean);
          applied.values = parse_dense(reply_full);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const bool values_only = salient && wire_mode == WireMode::kValuesOnly &&
                                   session.server.sent_indices[i];
          transport.send(Direction::kDown, i,
                         {salient ? MessageType::kSparseGrad : MessageType::kDenseGrad,
                          values_only ? reply_values : reply_full});
          if (salient) session.server.sent_indices[i] = true;
        }
        t_done = Clock::now();
        nn::apply_update_in_place(session.server.params, applied, lr);
      });

  const TrafficTotals after = transport.totals();
  RoundMetrics m;
  m.round = session.rounds_done++;
  m.epoch = session.clients.front().batches.epoch();
  m.lr = lr;
  m.train_loss = std::accumulate(losses.begin(), losses.end(), 0.0) /
                 static_cast<double>(n);
  m.bytes_up = after.up - before.up;
  m.bytes_down = after.down - before.down;
  m.comm_seconds = seconds(t_done - t0);
  m.gather_seconds = seconds(t_gathered - t0);
  return m;
}

RoundMetrics training_round_salient(Session& session, double lr) {
  return training_round(session, Protocol::kSalient, lr);
}

RoundMetrics training_round_fedavg(Session& session, double lr) {
  return training_round(session, Protocol::kFedAvg, lr);
}

double scheduled_lr(double base_lr, std::size_t epoch, std::size_t epochs) {
  if (2 * epoch < epochs) return base_lr;
  if (4 * epoch < 3 * epochs) return base_lr * 0.1;
  return base_lr * 0.01;
}

std::vector<double> evaluate_clients(const Session& session) {
  std::vector<double> acc;
  acc.reserve(session.n_clients());
  for (const ClientState& c : session.clients) {
    acc.push_back(nn::forward_loss(c.params, session.config.arch,
                                   c.data.test.all()).accuracy);
  }
  return acc;
}

std::vector<RoundMetrics> run_training(Session& session, std::size_t epochs,
                                       double base_lr, Protocol protocol,
                                       const RoundCallback& on_round) {
  std::vector<RoundMetrics> metrics;
  metrics.reserve(epochs * session.steps_per_epoch);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const double lr = scheduled_lr(base_lr, epoch, epochs);
    for (std::size_t step = 0; step < session.steps_per_epoch; ++step) {
      RoundMetrics m = training_round(session, protocol, lr);
      m.epoch = epoch;
      if (step + 1 == session.steps_per_epoch) {
        m.client_test_acc = evaluate_clients(session);
        m.mean_test_acc =
            std::accumulate(m.client_test_acc.begin(), m.client_test_acc.end(), 0.0) /
            static_cast<double>(m.client_test_acc.size());
        spdlog::info("[{}] epoch {} lr={:g} loss={:.4f} test_acc={:.4f}",
                     to_string(protocol), epoch, lr, m.train_loss, *m.mean_test_acc);
      }
      if (on_round) on_round(m);
      metrics.push_back(std::move(m));
    }
  }
  return metrics;
}

bool replicas_identical(const Session& session) {
  for (const ClientState& c : session.clients) {
    const auto& a = c.params.values;
    const auto& b = session.server.params.values;
    if (a.size() != b.size() ||
        std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace salientgrads::fed
