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


#include <doctest.h>

#include <random>

#include "dbrs/models.hpp"
#include "dbrs/oracle.hpp"
#include "dbrs/runtime.hpp"
#include "fixtures.hpp"

using namespace dbrs;
using dbrs::testing::log_of;

namespace {

Partitioning manual(std::vector<std::uint32_t> owner, std::size_t workers) {
  Partitioning p;
  p.block_of = std::move(owner);
  p.workers = workers;
  for (std::uint32_t w = 0; w < workers; ++w) p.worker_of_block.push_back(w);
  return p;
}

Partitioning cut(const FactorGraph& g, std::size_t workers, std::uint64_t seed = 1) {
  return partition(g, make_cut_problem(g, {}, kDefaultCommCost, kDefaultBalance, workers), seed);
}

std::vector<WorkerConfig> configs_for(const FactorGraph& g, const Partitioning& p) {
  return make_worker_configs(g, p, RuntimeParams{});
}

}  // namespace

TEST_CASE("flush coalesces per edge and batches per destination") {
  // vars 0..3, factors 4=(0,1) 5=(1,2) 6=(2,3)
  const FactorGraph g = random_chain(7, 2, 3);
  const Partitioning part = manual({0, 0, 0, 2, 1, 2, 2}, 3);
  const auto cfg = configs_for(g, part);
  ScriptedTransport t(3);
  Worker w0(g, cfg[0], part.block_of, 3, t);

  CHECK(w0.flush() == 0);
  CHECK(t.in_flight() == 0);

  w0.queue_external({1, 4, log_of({0.6, 0.4}), 0.1});
  w0.queue_external({1, 4, log_of({0.7, 0.3}), 0.1});
  CHECK(w0.queued_external() == 1);
  CHECK(w0.flush() == 1);
  CHECK(t.packets_sent(0) == 1);

  w0.queue_external({1, 4, log_of({0.6, 0.4}), 0.1});
  w0.queue_external({1, 5, log_of({0.6, 0.4}), 0.1});
  w0.queue_external({2, 6, log_of({0.6, 0.4}), 0.1});
  CHECK(w0.flush() == 3);
  CHECK(t.packets_sent(0) == 3);
  CHECK(w0.sent() == 4);
  CHECK_THROWS_AS(w0.queue_external({5, 2, log_of({0.5, 0.5}), 0.0}), StructuralError);
}

TEST_CASE("inbound delivery") {
  // vars 0..2, factors 3=(0,1) 4=(1,2)
  const FactorGraph g = random_chain(5, 2, 4);
  const Partitioning part = manual({0, 0, 1, 0, 1}, 2);
  const auto cfg = configs_for(g, part);
  ScriptedTransport t(2, true);
  Worker w0(g, cfg[0], part.block_of, 2, t);
  Worker w1(g, cfg[1], part.block_of, 2, t);

  CHECK(w1.deliver_inbound().empty());

  w0.queue_external({1, 4, log_of({0.5, 0.5}), 0.0});
  w0.flush();
  auto changed = w1.deliver_inbound();
  REQUIRE(changed.size() == 1);
  CHECK(changed[0].first == 4);
  CHECK(changed[0].second == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w1.received() == 1);

  w0.queue_external({1, 4, log_of({0.999, 0.001}), 0.5});
  w0.flush();
  changed = w1.deliver_inbound();
  REQUIRE(changed.size() == 1);
  CHECK(changed[0].second > 0.1);

  // a message addressed to a vertex worker 1 does not own
  t.send(0, 1, encode_envelope(Envelope{EnvelopeKind::bp_message, 4, 1, 99, {0.5, 0.5}, {}}));
  CHECK_THROWS_AS(w1.deliver_inbound(), StructuralError);
  // replayed sequence number
  t.send(0, 1, encode_envelope(Envelope{EnvelopeKind::bp_message, 1, 4, 1, {0.5, 0.5}, {}}));
  CHECK_THROWS_AS(w1.deliver_inbound(), TransportError);
}

TEST_CASE("owner map must agree with config") {
  const FactorGraph g = random_chain(5, 2, 4);
  const Partitioning part = manual({0, 0, 1, 0, 1}, 2);
  auto cfg = configs_for(g, part);
  cfg[0].owned.push_back(2);
  InProcessTransport t(2);
  CHECK_THROWS_AS(Worker(g, cfg[0], part.block_of, 2, t), StructuralError);
  WorkerConfig bad;
  bad.damping = 1.0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("single worker on a tree matches enumeration") {
  const FactorGraph g = random_chain(15, 3, 9);
  const Partitioning part = cut(g, 1);
  const InferenceResult r = run_inference(g, part, RuntimeParams{});
  CHECK(r.converged);
  CHECK(r.termination.declared);
  CHECK(r.termination.channels_empty);
  CHECK(r.termination.max_residual <= kDefaultBeta);
  CHECK(accuracy(r.beliefs, enumerate_marginals(g)) < 1e-3);
}

TEST_CASE("partitioned trees match enumeration under every driver") {
  // Damped runs stop with part of each last damped step never scheduled, so
  // they get a looser bound than undamped ones.
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const FactorGraph g = dbrs::testing::random_tree(rng, 14);
    const Beliefs exact = enumerate_marginals(g);
    for (std::size_t p : {2u, 3u}) {
      const Partitioning part = cut(g, p, trial);
      for (Driver d : {Driver::round_robin, Driver::random_schedule, Driver::threads}) {
        RunOptions opt;
        opt.driver = d;
        opt.schedule_seed = trial;
        RuntimeParams undamped;
        undamped.damping = 0.0;
        undamped.beta = 1e-8;
        const InferenceResult exact_run = run_inference(g, part, undamped, opt);
        INFO("trial " << trial << " p " << p << " driver " << int(d));
        CHECK(exact_run.converged);
        CHECK(accuracy(exact_run.beliefs, exact) < 1e-6);

        const InferenceResult r = run_inference(g, part, RuntimeParams{}, opt);
        CHECK(r.converged);
        CHECK(r.termination.channels_empty);
        CHECK(r.termination.sent == r.termination.received);
        CHECK(r.termination.max_residual <= kDefaultBeta);
        CHECK(accuracy(r.beliefs, exact) < 2e-2);
      }
    }
  }
}

TEST_CASE("single-threaded drivers are deterministic") {
  const FactorGraph g = generate_denoise(DenoiseSpec{12, 12, 3, 1.0, 1.0, 0.5, 5}).graph;
  const Partitioning part = cut(g, 3);
  for (Driver d : {Driver::round_robin, Driver::random_schedule}) {
    RunOptions opt;
    opt.driver = d;
    opt.schedule_seed = 11;
    const InferenceResult a = run_inference(g, part, RuntimeParams{}, opt);
    const InferenceResult b = run_inference(g, part, RuntimeParams{}, opt);
    CHECK(a.converged);
    CHECK(a.update_counts == b.update_counts);
    CHECK(a.beliefs == b.beliefs);
    CHECK(a.total_updates == b.total_updates);
  }
}

TEST_CASE("loopy grid agrees across worker counts") {
  const FactorGraph g = generate_denoise(DenoiseSpec{10, 10, 3, 1.0, 1.0, 0.5, 2}).graph;
  const InferenceResult one = run_inference(g, cut(g, 1), RuntimeParams{});
  REQUIRE(one.converged);
  for (std::size_t p : {2u, 4u}) {
    RunOptions opt;
    opt.driver = Driver::threads;
    const InferenceResult many = run_inference(g, cut(g, p), RuntimeParams{}, opt);
    CHECK(many.converged);
    CHECK(accuracy(one.beliefs, many.beliefs) < 1e-3);
  }
}

TEST_CASE("update budget") {
  const FactorGraph g = random_chain(101, 3, 2);
  RuntimeParams params;
  params.max_updates = 5;
  const InferenceResult r = run_inference(g, cut(g, 2), params);
  CHECK(r.budget_exhausted);
  CHECK_FALSE(r.converged);
  CHECK(r.total_updates >= 10);
  CHECK(r.termination.declared);
}

TEST_CASE("update counts and trace") {
  const FactorGraph g = random_chain(41, 2, 8);
  RunOptions opt;
  opt.trace_every = 10;
  std::uint64_t calls = 0;
  std::uint64_t last = 0;
  opt.trace = [&](std::uint64_t updates, const Beliefs& b) {
    ++calls;
    CHECK(updates >= last);
    last = updates;
    CHECK(b.size() == g.num_variables());
  };
  opt.record_splashes = true;
  const InferenceResult r = run_inference(g, cut(g, 2), RuntimeParams{}, opt);
  CHECK(r.converged);
  CHECK(calls > 1);
  std::uint64_t sum = 0;
  for (auto c : r.update_counts) sum += c;
  CHECK(sum == r.total_updates);
  CHECK_FALSE(r.splashes.empty());
  CHECK_FALSE(r.metrics.empty());
}

TEST_CASE("mismatched inputs are rejected") {
  const FactorGraph g = random_chain(9, 2, 1);
  const FactorGraph other = random_chain(11, 2, 1);
  CHECK_THROWS_AS(run_inference(g, cut(other, 2), RuntimeParams{}), ArgumentError);
  const Partitioning part = cut(g, 2);
  auto cfg = configs_for(g, part);
  InProcessTransport three(3);
  CHECK_THROWS_AS(run_inference(g, part, cfg, three), ArgumentError);
}
