/*
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing,
 *  software distributed under the License is distributed on an "AS
 *  IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 *  express or implied.  See the License for the specific language
 *  governing permissions and limitations under the License.
 */


#include "dbrs/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace dbrs {

void WorkerConfig::validate() const {
  if (flush_interval < 1) throw ArgumentError("flush interval must be >= 1");
  if (!(beta >= 0.0)) throw ArgumentError("beta must be nonnegative");
  if (!(damping >= 0.0 && damping < 1.0)) throw ArgumentError("damping must lie in [0, 1)");
}

std::vector<WorkerConfig> make_worker_configs(const FactorGraph& graph, const Partitioning& part,
                                              const RuntimeParams& params) {
  if (part.block_of.size() != graph.num_vertices()) {
    throw ArgumentError("partition covers " + std::to_string(part.block_of.size()) +
                        " vertices but the graph has " + std::to_string(graph.num_vertices()));
  }
  auto owned = part.vertices_by_worker();
  std::vector<WorkerConfig> configs(part.workers);
  for (std::uint32_t w = 0; w < part.workers; ++w) {
    WorkerConfig& c = configs[w];
    c.id = w;
    c.owned = std::move(owned[w]);
    c.beta = params.beta;
    c.w_max = params.w_max > 0.0 ? params.w_max : default_splash_work(graph, part.workers);
    c.damping = params.damping;
    c.flush_interval = params.flush_interval;
    c.mode = params.mode;
    c.max_updates = params.max_updates;
  }
  return configs;
}

// -- worker -------------------------------------------------------------------

Worker::Worker(const FactorGraph& graph, WorkerConfig config, std::span<const std::uint32_t> owner_of,
               std::size_t workers, Transport& transport, bool record_splashes, bool wall_clock)
    : graph_(&graph),
      config_(std::move(config)),
      owner_of_(owner_of),
      workers_(workers),
      transport_(&transport),
      shard_(graph, config_.owned),
      queue_(graph.num_vertices()),
      ring_(config_.id, workers),
      record_splashes_(record_splashes),
      wall_clock_(wall_clock),
      start_(std::chrono::steady_clock::now()),
      outbox_(workers),
      next_seq_(workers, 1),
      last_seq_(workers, 0) {
  config_.validate();
  if (config_.w_max <= 0.0) config_.w_max = default_splash_work(graph, workers);
  for (VertexId v : config_.owned) {
    if (owner_of_[v] != config_.id) throw StructuralError("owner map disagrees with worker config");
    queue_.push(v, shard_.residual(v, config_.mode));
  }
  // worker 0 starts out holding the token
  holding_token_ = config_.id == 0;
}

void Worker::attach_collector(Beliefs* beliefs, std::vector<std::uint64_t>* counts) {
  collected_beliefs_ = beliefs;
  collected_counts_ = counts;
}

bool Worker::locally_converged() const {
  return exhausted_ || queue_.top_priority() <= config_.beta;
}

std::size_t Worker::queued_external() const {
  std::size_t n = 0;
  for (const auto& box : outbox_) n += box.size();
  return n;
}

void Worker::queue_external(const OutboundMessage& msg) {
  const std::uint32_t to = owner_of_[msg.target];
  if (to == config_.id) throw StructuralError("external message for a local vertex");
  outbox_[to][{msg.source, msg.target}] = msg.message;
}

void Worker::send_envelopes(std::uint32_t to, std::vector<Envelope>& envs) {
  std::vector<std::uint8_t> bytes;
  for (Envelope& env : envs) {
    env.sequence = next_seq_[to]++;
    encode_envelope(env, bytes);
  }
  transport_->send(config_.id, to, std::move(bytes));
}

std::uint64_t Worker::flush() {
  std::uint64_t count = 0;
  for (std::uint32_t to = 0; to < workers_; ++to) {
    auto& box = outbox_[to];
    if (box.empty()) continue;
    std::vector<Envelope> envs;
    envs.reserve(box.size());
    for (const auto& [edge, msg] : box) {
      const Vector p = to_linear(msg);
      envs.push_back(Envelope{EnvelopeKind::bp_message, edge.first, edge.second, 0,
                              std::vector<double>(p.data(), p.data() + p.size()), {}});
    }
    count += envs.size();
    box.clear();
    send_envelopes(to, envs);
  }
  sent_ += count;
  return count;
}

std::vector<std::pair<VertexId, double>> Worker::deliver_inbound() {
  std::vector<std::pair<VertexId, double>> changed;
  while (auto packet = transport_->poll(config_.id)) {
    for (const Envelope& env : decode_batch(packet->bytes)) {
      if (env.sequence <= last_seq_[packet->from]) {
        throw TransportError("sequence regression on channel " + std::to_string(packet->from) +
                             " -> " + std::to_string(config_.id));
      }
      last_seq_[packet->from] = env.sequence;
      switch (env.kind) {
        case EnvelopeKind::bp_message: {
          if (env.dst >= owner_of_.size() || owner_of_[env.dst] != config_.id) {
            throw StructuralError("worker " + std::to_string(config_.id) +
                                  " received a message for vertex " + std::to_string(env.dst) +
                                  " it does not own");
          }
          const Vector p = Eigen::Map<const Vector>(env.payload.data(),
                                                    static_cast<Eigen::Index>(env.payload.size()));
          const double delta = apply_inbound_message(shard_, env.dst, env.src, to_log(p));
          ++received_;
          ring_.mark_dirty();
          changed.emplace_back(env.dst, delta);
          break;
        }
        case EnvelopeKind::token:
          holding_token_ = true;
          token_ = env.token;
          break;
        case EnvelopeKind::shutdown:
          shutdown_ = true;
          break;
        case EnvelopeKind::belief_report:
          if (config_.id != 0) throw StructuralError("belief report sent to a worker other than 0");
          store_report(env.src, env.payload);
          ++reports_received_;
          break;
      }
    }
  }
  return changed;
}

void Worker::store_report(VertexId v, std::span<const double> payload) {
  if (collected_counts_ == nullptr) return;
  if (v >= graph_->num_vertices() || payload.empty()) throw StructuralError("malformed belief report");
  (*collected_counts_)[v] = static_cast<std::uint64_t>(payload.back());
  if (graph_->is_variable(v)) {
    if (payload.size() != static_cast<std::size_t>(graph_->cardinality(v)) + 1) throw StructuralError("belief report size mismatch");
    (*collected_beliefs_)[v] = Eigen::Map<const Vector>(payload.data(),
                                                        static_cast<Eigen::Index>(payload.size() - 1));
  }
}

void Worker::splash_loop() {
  const VertexId root = *queue_.pop();
  const SplashPlan plan = build_splash(shard_, root, config_.w_max, config_.beta, config_.mode);
  SplashStats stats = execute_splash(shard_, plan, config_.damping,
                                     [this](const OutboundMessage& m) { queue_external(m); });
  updates_ += stats.updates;
  ring_.mark_dirty();

  auto inbound = deliver_inbound();
  stats.changed.insert(stats.changed.end(), inbound.begin(), inbound.end());
  promote_and_reschedule(queue_, shard_, stats.changed, plan.update_sequence, config_.mode);

  ++loops_;
  std::uint64_t flushed = 0;
  if (loops_ % config_.flush_interval == 0) flushed = flush();

  LoopMetrics m;
  m.worker = config_.id;
  m.loop = loops_;
  m.updates = updates_;
  m.splash_work = stats.work;
  m.msgs_sent = sent_;
  m.msgs_recv = received_;
  m.bytes_sent = transport_->bytes_sent(config_.id);
  m.max_residual = queue_.top_priority();
  if (wall_clock_) {
    m.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now() - start_).count();
  }
  metrics_.push_back(m);

  if (record_splashes_) {
    splashes_.push_back(SplashRecord{config_.id, loops_, root, plan.bfs_order.size(),
                                     config_.owned.size(), plan.truncated_by_work, flushed});
  }
}

void Worker::try_pass_token() {
  if (!holding_token_ || shutdown_ || declared_) return;
  if (!locally_converged() || queued_external() != 0) return;
  const TokenDecision d = ring_.pass(token_, sent_, received_);
  ++token_passes_;
  holding_token_ = false;
  if (d.terminate) {
    declare_termination();
    return;
  }
  std::vector<Envelope> envs{Envelope{EnvelopeKind::token, config_.id, ring_.next(), 0, {}, d.token}};
  send_envelopes(ring_.next(), envs);
}

void Worker::declare_termination() {
  declared_ = true;
  channels_empty_ = transport_->in_flight() == 0;
  reports_expected_ = graph_->num_vertices() - config_.owned.size();
  for (std::uint32_t to = 1; to < workers_; ++to) {
    std::vector<Envelope> envs{Envelope{EnvelopeKind::shutdown, 0, to, 0, {}, {}}};
    send_envelopes(to, envs);
  }
  for (VertexId v : config_.owned) {
    std::vector<double> payload;
    if (graph_->is_variable(v)) {
      const Vector p = to_linear(shard_.at(v).belief);
      payload.assign(p.data(), p.data() + p.size());
    }
    payload.push_back(static_cast<double>(shard_.at(v).update_count));
    store_report(v, payload);
  }
}

void Worker::send_reports() {
  std::vector<Envelope> envs;
  for (VertexId v : config_.owned) {
    Envelope env{EnvelopeKind::belief_report, v, 0, 0, {}, {}};
    if (graph_->is_variable(v)) {
      const Vector p = to_linear(shard_.at(v).belief);
      env.payload.assign(p.data(), p.data() + p.size());
    }
    env.payload.push_back(static_cast<double>(shard_.at(v).update_count));
    envs.push_back(std::move(env));
  }
  if (!envs.empty()) send_envelopes(0, envs);
}

bool Worker::step() {
  if (finished_) return false;

  if (!shutdown_ && !declared_ && !exhausted_ && queue_.top_priority() > config_.beta) {
    if (updates_ >= config_.max_updates) {
      exhausted_ = true;
    } else {
      splash_loop();
      return true;
    }
  }

  bool progress = false;
  auto inbound = deliver_inbound();
  if (!inbound.empty()) {
    promote_and_reschedule(queue_, shard_, inbound, {}, config_.mode);
    progress = true;
  }
  if (shutdown_) {
    send_reports();
    finished_ = true;
    return true;
  }
  if (declared_) {
    if (reports_received_ >= reports_expected_) finished_ = true;
    return progress || finished_;
  }
  if (locally_converged() && queued_external() != 0) {
    flush();
    progress = true;
  }
  if (holding_token_ && locally_converged() && queued_external() == 0) {
    try_pass_token();
    progress = true;
    if (declared_ && reports_expected_ == 0) finished_ = true;
  }
  return progress;
}

// -- drivers ------------------------------------------------------------------

Beliefs snapshot_beliefs(const FactorGraph& graph, std::span<const Worker> workers) {
  Beliefs out(graph.num_variables());
  for (const Worker& w : workers) {
    for (VertexId v : w.shard().owned()) {
      if (graph.is_variable(v)) out[v] = to_linear(w.shard().at(v).belief);
    }
  }
  return out;
}

namespace {

std::uint64_t total_updates(std::span<const Worker> workers) {
  std::uint64_t n = 0;
  for (const Worker& w : workers) n += w.updates();
  return n;
}

bool all_finished(std::span<const Worker> workers) {
  return std::all_of(workers.begin(), workers.end(), [](const Worker& w) { return w.finished(); });
}

class Tracer {
 public:
  Tracer(const FactorGraph& graph, const RunOptions& options) : graph_(graph), options_(options) {}

  void operator()(std::span<const Worker> workers) {
    if (options_.trace_every == 0 || !options_.trace) return;
    const std::uint64_t n = total_updates(workers);
    if (started_ && n < next_) return;
    started_ = true;
    options_.trace(n, snapshot_beliefs(graph_, workers));
    next_ = (n / options_.trace_every + 1) * options_.trace_every;
  }

 private:
  const FactorGraph& graph_;
  const RunOptions& options_;
  bool started_ = false;
  std::uint64_t next_ = 0;
};

void drive_round_robin(std::vector<Worker>& workers, Tracer& trace) {
  trace(workers);
  while (!all_finished(workers)) {
    bool progress = false;
    for (Worker& w : workers) {
      progress |= w.step();
      trace(workers);
    }
    if (!progress) throw std::runtime_error("runtime stalled: no worker can make progress");
  }
}

void drive_random(std::vector<Worker>& workers, ScriptedTransport& transport, std::uint64_t seed,
                  Tracer& trace) {
  std::mt19937_64 rng(seed);
  trace(workers);
  while (!all_finished(workers)) {
    const auto channels = transport.busy_channels();
    std::vector<std::uint32_t> live;
    for (std::uint32_t i = 0; i < workers.size(); ++i) {
      if (!workers[i].finished()) live.push_back(i);
    }
    std::uniform_int_distribution<std::size_t> pick(0, live.size() + channels.size() - 1);
    const std::size_t choice = pick(rng);
    if (choice < live.size()) {
      if (!workers[live[choice]].step() && channels.empty()) {
        // nothing in flight: make sure some worker can still move
        bool progress = false;
        for (std::uint32_t i : live) progress |= workers[i].step();
        if (!progress) throw std::runtime_error("runtime stalled: no worker can make progress");
      }
    } else {
      const auto [from, to] = channels[choice - live.size()];
      transport.deliver(from, to);
    }
    trace(workers);
  }
}

void drive_threads(std::vector<Worker>& workers, Transport& transport) {
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers.size());
  for (std::uint32_t i = 0; i < workers.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        Worker& w = workers[i];
        while (!w.finished() && !abort.load()) {
          if (!w.step()) transport.wait(i, std::chrono::microseconds(500));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

InferenceResult run_inference(const FactorGraph& graph, const Partitioning& part,
                              std::span<const WorkerConfig> configs, Transport& transport,
                              const RunOptions& options) {
  if (part.block_of.size() != graph.num_vertices()) {
    throw ArgumentError("partition does not match the graph");
  }
  if (configs.size() != part.workers || transport.workers() != part.workers) {
    throw ArgumentError("worker count mismatch between partition, configs and transport");
  }
  std::vector<std::uint32_t> owner_of(graph.num_vertices());
  for (VertexId v = 0; v < graph.num_vertices(); ++v) owner_of[v] = part.worker_of(v);

  InferenceResult result;
  result.beliefs.resize(graph.num_variables());
  result.update_counts.assign(graph.num_vertices(), 0);

  const bool wall = options.driver == Driver::threads;
  std::vector<Worker> workers;
  workers.reserve(configs.size());
  for (std::uint32_t i = 0; i < configs.size(); ++i) {
    if (configs[i].id != i) throw ArgumentError("worker configs must be ordered by id");
    workers.emplace_back(graph, configs[i], owner_of, configs.size(), transport,
                         options.record_splashes, wall);
  }
  workers[0].attach_collector(&result.beliefs, &result.update_counts);

  Tracer trace(graph, options);
  switch (options.driver) {
    case Driver::threads:
      drive_threads(workers, transport);
      break;
    case Driver::round_robin:
      drive_round_robin(workers, trace);
      break;
    case Driver::random_schedule: {
      auto* scripted = dynamic_cast<ScriptedTransport*>(&transport);
      if (scripted == nullptr) throw ArgumentError("random schedule needs a ScriptedTransport");
      drive_random(workers, *scripted, options.schedule_seed, trace);
      break;
    }
  }

  TerminationReport& t = result.termination;
  t.declared = workers[0].declared();
  t.channels_empty = workers[0].channels_empty_at_declaration();
  for (const Worker& w : workers) {
    t.sent += w.sent();
    t.received += w.received();
    t.token_passes += w.token_passes();
    t.max_residual = std::max(t.max_residual, w.shard().max_residual(configs[0].mode));
    result.budget_exhausted |= w.budget_exhausted();
    result.total_updates += w.updates();
    result.metrics.insert(result.metrics.end(), w.metrics().begin(), w.metrics().end());
    result.splashes.insert(result.splashes.end(), w.splashes().begin(), w.splashes().end());
  }
  result.converged = t.declared && !result.budget_exhausted;
  return result;
}

InferenceResult run_inference(const FactorGraph& graph, const Partitioning& part,
                              const RuntimeParams& params, const RunOptions& options) {
  const auto configs = make_worker_configs(graph, part, params);
  std::unique_ptr<Transport> transport;
  switch (options.driver) {
    case Driver::threads:
      transport = std::make_unique<InProcessTransport>(part.workers);
      break;
    case Driver::round_robin:
      transport = std::make_unique<ScriptedTransport>(part.workers, true);
      break;
    case Driver::random_schedule:
      transport = std::make_unique<ScriptedTransport>(part.workers, false);
      break;
  }
  return run_inference(graph, part, configs, *transport, options);
}

}  // namespace dbrs
