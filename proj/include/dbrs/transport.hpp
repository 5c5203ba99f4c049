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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dbrs {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A serialized batch of envelopes travelling from one worker to another.
struct Packet {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::vector<std::uint8_t> bytes;
};

/// Reliable FIFO channels between every ordered pair of workers.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual std::size_t workers() const = 0;
  virtual void send(std::uint32_t from, std::uint32_t to, std::vector<std::uint8_t> bytes) = 0;
  /// Next packet addressed to `worker`, if one has arrived.
  virtual std::optional<Packet> poll(std::uint32_t worker) = 0;
  /// Block until something may be waiting for `worker` or the timeout passes.
  virtual void wait(std::uint32_t worker, std::chrono::microseconds timeout) = 0;
  /// Packets sent and not yet polled, whether held in a channel or an inbox.
  virtual std::size_t in_flight() const = 0;

  std::uint64_t bytes_sent(std::uint32_t worker) const;
  std::uint64_t packets_sent(std::uint32_t worker) const;

 protected:
  explicit Transport(std::size_t workers);
  void count_send(std::uint32_t from, std::uint32_t to, std::size_t bytes);

 private:
  std::vector<std::atomic<std::uint64_t>> bytes_;
  std::vector<std::atomic<std::uint64_t>> packets_;
};

/// Thread-safe in-process inboxes for concurrently running workers.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(std::size_t workers);

  std::size_t workers() const override { return inboxes_.size(); }
  void send(std::uint32_t from, std::uint32_t to, std::vector<std::uint8_t> bytes) override;
  std::optional<Packet> poll(std::uint32_t worker) override;
  void wait(std::uint32_t worker, std::chrono::microseconds timeout) override;
  std::size_t in_flight() const override { return pending_.load(); }

 private:
  struct Inbox {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<Packet> packets;
  };
  std::vector<Inbox> inboxes_;
  std::atomic<std::size_t> pending_{0};
};

/// Single-threaded transport whose channels hold packets until the caller
/// delivers them.  With `auto_deliver` every send lands in the inbox at once.
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(std::size_t workers, bool auto_deliver = false);

  std::size_t workers() const override { return inboxes_.size(); }
  void send(std::uint32_t from, std::uint32_t to, std::vector<std::uint8_t> bytes) override;
  std::optional<Packet> poll(std::uint32_t worker) override;
  void wait(std::uint32_t, std::chrono::microseconds) override {}
  std::size_t in_flight() const override;

  /// Channels (from, to) currently holding at least one packet.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> busy_channels() const;
  /// Move the head of channel (from, to) into `to`'s inbox.
  void deliver(std::uint32_t from, std::uint32_t to);
  void deliver_all();
  std::size_t inbox_size(std::uint32_t worker) const { return inboxes_.at(worker).size(); }

 private:
  bool auto_deliver_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::deque<Packet>> channels_;
  std::vector<std::deque<Packet>> inboxes_;
};

}  // namespace dbrs
