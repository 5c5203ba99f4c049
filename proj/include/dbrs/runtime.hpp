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


#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "dbrs/bp.hpp"
#include "dbrs/graph.hpp"
#include "dbrs/oracle.hpp"
#include "dbrs/partitioner.hpp"
#include "dbrs/scheduler.hpp"
#include "dbrs/token_ring.hpp"
#include "dbrs/transport.hpp"
#include "dbrs/wire.hpp"

namespace dbrs {

inline constexpr double kDefaultBeta = 1e-5;
inline constexpr double kDefaultDamping = 0.6;
inline constexpr std::uint32_t kDefaultFlushInterval = 10;
inline constexpr std::uint64_t kUnlimitedUpdates = std::numeric_limits<std::uint64_t>::max();

struct WorkerConfig {
  std::uint32_t id = 0;
  std::vector<VertexId> owned;
  double beta = kDefaultBeta;
  /// splash work bound; <= 0 picks default_splash_work
  double w_max = 0.0;
  double damping = kDefaultDamping;
  std::uint32_t flush_interval = kDefaultFlushInterval;
  ScheduleMode mode = ScheduleMode::belief;
  /// per-worker update budget
  std::uint64_t max_updates = kUnlimitedUpdates;

  void validate() const;
};

/// Settings shared by every worker.
struct RuntimeParams {
  double beta = kDefaultBeta;
  double w_max = 0.0;
  double damping = kDefaultDamping;
  std::uint32_t flush_interval = kDefaultFlushInterval;
  ScheduleMode mode = ScheduleMode::belief;
  std::uint64_t max_updates = kUnlimitedUpdates;
};

std::vector<WorkerConfig> make_worker_configs(const FactorGraph& graph, const Partitioning& part,
                                              const RuntimeParams& params);

struct LoopMetrics {
  std::uint32_t worker = 0;
  std::uint64_t loop = 0;
  std::uint64_t updates = 0;
  double splash_work = 0.0;
  std::uint64_t msgs_sent = 0;
  std::uint64_t msgs_recv = 0;
  std::uint64_t bytes_sent = 0;
  double max_residual = 0.0;
  std::int64_t wall_ns = 0;
};

struct SplashRecord {
  std::uint32_t worker = 0;
  std::uint64_t loop = 0;
  VertexId root = 0;
  std::size_t plan_size = 0;
  std::size_t owned = 0;
  bool truncated_by_work = false;
  /// BP messages this worker put on the wire during the loop
  std::uint64_t external_sent = 0;
};

struct TerminationReport {
  bool declared = false;
  /// no packet held anywhere when worker 0 declared termination
  bool channels_empty = false;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  /// largest scheduling residual over all shards after the run
  double max_residual = 0.0;
  std::uint64_t token_passes = 0;
};

struct InferenceResult {
  Beliefs beliefs;
  std::vector<std::uint64_t> update_counts;
  bool converged = false;
  bool budget_exhausted = false;
  std::uint64_t total_updates = 0;
  std::vector<LoopMetrics> metrics;
  std::vector<SplashRecord> splashes;
  TerminationReport termination;
};

enum class Driver {
  /// one thread per worker over InProcessTransport
  threads,
  /// single thread stepping workers in id order, instant delivery
  round_robin,
  /// single thread picking worker steps and channel deliveries at random
  random_schedule,
};

struct RunOptions {
  Driver driver = Driver::round_robin;
  std::uint64_t schedule_seed = 0;
  bool record_splashes = false;
  /// call `trace` whenever the global update count crosses a multiple of
  /// trace_every (single-threaded drivers only)
  std::uint64_t trace_every = 0;
  std::function<void(std::uint64_t updates, const Beliefs& beliefs)> trace;
};

/// One worker: splash loop, boundary exchange and token handling over its own shard.
class Worker {
 public:
  Worker(const FactorGraph& graph, WorkerConfig config, std::span<const std::uint32_t> owner_of,
         std::size_t workers, Transport& transport, bool record_splashes = false,
         bool wall_clock = false);

  /// Advance by one loop iteration.  Returns whether anything happened.
  bool step();
  bool finished() const { return finished_; }

  /// Queue a message for a vertex owned elsewhere (latest per edge wins).
  void queue_external(const OutboundMessage& msg);
  /// Send queued messages, one batch per destination.  Returns BP messages sent.
  std::uint64_t flush();
  /// Drain the inbox; returns belief changes of BP messages for promotion.
  std::vector<std::pair<VertexId, double>> deliver_inbound();

  bool locally_converged() const;
  bool budget_exhausted() const { return exhausted_; }
  bool holds_token() const { return holding_token_; }
  std::uint64_t sent() const { return sent_; }
  std::uint64_t received() const { return received_; }
  std::uint64_t updates() const { return updates_; }
  std::size_t queued_external() const;

  const Shard& shard() const { return shard_; }
  const PriorityQueue& queue() const { return queue_; }
  const std::vector<LoopMetrics>& metrics() const { return metrics_; }
  const std::vector<SplashRecord>& splashes() const { return splashes_; }

  /// Worker 0 only: where collected beliefs and counts go.
  void attach_collector(Beliefs* beliefs, std::vector<std::uint64_t>* counts);
  bool declared() const { return declared_; }
  bool channels_empty_at_declaration() const { return channels_empty_; }
  std::uint64_t token_passes() const { return token_passes_; }

 private:
  void splash_loop();
  void try_pass_token();
  void declare_termination();
  void send_reports();
  void send_envelopes(std::uint32_t to, std::vector<Envelope>& envs);
  void store_report(VertexId v, std::span<const double> payload);

  const FactorGraph* graph_;
  WorkerConfig config_;
  std::span<const std::uint32_t> owner_of_;
  std::size_t workers_;
  Transport* transport_;
  Shard shard_;
  PriorityQueue queue_;
  TokenRingNode ring_;
  bool record_splashes_;
  bool wall_clock_;
  std::chrono::steady_clock::time_point start_;

  std::vector<std::map<std::pair<VertexId, VertexId>, Vector>> outbox_;
  std::vector<std::uint64_t> next_seq_;
  std::vector<std::uint64_t> last_seq_;

  std::uint64_t loops_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
  std::uint64_t token_passes_ = 0;
  bool exhausted_ = false;
  bool holding_token_ = false;
  TokenState token_;
  bool shutdown_ = false;
  bool finished_ = false;

  bool declared_ = false;
  bool channels_empty_ = false;
  std::size_t reports_expected_ = 0;
  std::size_t reports_received_ = 0;
  Beliefs* collected_beliefs_ = nullptr;
  std::vector<std::uint64_t>* collected_counts_ = nullptr;

  std::vector<LoopMetrics> metrics_;
  std::vector<SplashRecord> splashes_;
};

InferenceResult run_inference(const FactorGraph& graph, const Partitioning& part,
                              std::span<const WorkerConfig> configs, Transport& transport,
                              const RunOptions& options = {});

/// Builds per-worker configs and a transport suited to `options.driver`.
InferenceResult run_inference(const FactorGraph& graph, const Partitioning& part,
                              const RuntimeParams& params, const RunOptions& options = {});

/// Beliefs of every variable read straight from the shards (instrumentation).
Beliefs snapshot_beliefs(const FactorGraph& graph, std::span<const Worker> workers);

}  // namespace dbrs
