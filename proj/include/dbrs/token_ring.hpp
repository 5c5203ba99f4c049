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

#include <cstddef>
#include <cstdint>

#include "dbrs/wire.hpp"

namespace dbrs {

inline constexpr std::uint32_t kCleanCyclesToTerminate = 2;

struct TokenDecision {
  bool terminate = false;
  TokenState token;
};

/// Per-worker side of the ring termination protocol.  Worker 0 starts and
/// closes every cycle; a cycle is clean when no worker did any work between
/// consecutive token visits (epoch unchanged) and the sent and received
/// tallies it gathered agree.
class TokenRingNode {
 public:
  TokenRingNode(std::uint32_t worker, std::size_t workers);

  std::uint32_t worker() const { return worker_; }
  std::uint32_t next() const { return static_cast<std::uint32_t>((worker_ + 1) % workers_); }

  /// Any splash or inbound BP message since the last token visit.
  void mark_dirty() { dirty_ = true; }
  bool dirty() const { return dirty_; }
  bool cycle_open() const { return cycle_open_; }
  std::uint64_t cycle_epoch() const { return cycle_epoch_; }

  /// Called by the holder once it is locally converged with nothing left to
  /// flush.  `sent` and `received` are the worker's cumulative BP tallies.
  TokenDecision pass(TokenState token, std::uint64_t sent, std::uint64_t received);

 private:
  std::uint32_t worker_;
  std::size_t workers_;
  bool dirty_ = true;
  bool cycle_open_ = false;
  std::uint64_t cycle_epoch_ = 0;
};

}  // namespace dbrs
