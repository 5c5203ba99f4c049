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


#include "dbrs/token_ring.hpp"

#include "dbrs/graph.hpp"

namespace dbrs {

TokenRingNode::TokenRingNode(std::uint32_t worker, std::size_t workers)
    : worker_(worker), workers_(workers) {
  if (workers == 0 || worker >= workers) throw ArgumentError("token ring worker id out of range");
}

TokenDecision TokenRingNode::pass(TokenState token, std::uint64_t sent, std::uint64_t received) {
  if (dirty_) {
    ++token.epoch;
    dirty_ = false;
  }
  if (worker_ != 0) {
    token.sent += sent;
    token.received += received;
    return {false, token};
  }

  if (cycle_open_) {
    const bool clean = token.epoch == cycle_epoch_ && token.sent == token.received;
    token.clean_cycles = clean ? token.clean_cycles + 1 : 0;
    if (token.clean_cycles >= kCleanCyclesToTerminate) return {true, token};
  }
  cycle_open_ = true;
  cycle_epoch_ = token.epoch;
  token.sent = sent;
  token.received = received;
  return {false, token};
}

}  // namespace dbrs
