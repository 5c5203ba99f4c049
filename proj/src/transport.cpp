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


#include "dbrs/transport.hpp"

#include <string>

namespace dbrs {

namespace {

void check_route(std::size_t workers, std::uint32_t from, std::uint32_t to) {
  if (from >= workers || to >= workers) {
    throw TransportError("no channel " + std::to_string(from) + " -> " + std::to_string(to));
  }
}

}  // namespace

Transport::Transport(std::size_t workers) : bytes_(workers), packets_(workers) {}

std::uint64_t Transport::bytes_sent(std::uint32_t worker) const { return bytes_.at(worker).load(); }
std::uint64_t Transport::packets_sent(std::uint32_t worker) const { return packets_.at(worker).load(); }

void Transport::count_send(std::uint32_t from, std::uint32_t to, std::size_t bytes) {
  check_route(bytes_.size(), from, to);
  bytes_[from] += bytes;
  packets_[from] += 1;
}

InProcessTransport::InProcessTransport(std::size_t workers) : Transport(workers), inboxes_(workers) {}

void InProcessTransport::send(std::uint32_t from, std::uint32_t to, std::vector<std::uint8_t> bytes) {
  count_send(from, to, bytes.size());
  Inbox& box = inboxes_[to];
  {
    std::lock_guard lock(box.mutex);
    ++pending_;
    box.packets.push_back(Packet{from, to, std::move(bytes)});
  }
  box.ready.notify_one();
}

std::optional<Packet> InProcessTransport::poll(std::uint32_t worker) {
  Inbox& box = inboxes_.at(worker);
  std::lock_guard lock(box.mutex);
  if (box.packets.empty()) return std::nullopt;
  Packet p = std::move(box.packets.front());
  box.packets.pop_front();
  --pending_;
  return p;
}

void InProcessTransport::wait(std::uint32_t worker, std::chrono::microseconds timeout) {
  Inbox& box = inboxes_.at(worker);
  std::unique_lock lock(box.mutex);
  box.ready.wait_for(lock, timeout, [&] { return !box.packets.empty(); });
}

ScriptedTransport::ScriptedTransport(std::size_t workers, bool auto_deliver)
    : Transport(workers), auto_deliver_(auto_deliver), inboxes_(workers) {}

void ScriptedTransport::send(std::uint32_t from, std::uint32_t to, std::vector<std::uint8_t> bytes) {
  count_send(from, to, bytes.size());
  Packet p{from, to, std::move(bytes)};
  if (auto_deliver_) {
    inboxes_[to].push_back(std::move(p));
  } else {
    channels_[{from, to}].push_back(std::move(p));
  }
}

std::optional<Packet> ScriptedTransport::poll(std::uint32_t worker) {
  auto& box = inboxes_.at(worker);
  if (box.empty()) return std::nullopt;
  Packet p = std::move(box.front());
  box.pop_front();
  return p;
}

std::size_t ScriptedTransport::in_flight() const {
  std::size_t n = 0;
  for (const auto& [key, q] : channels_) n += q.size();
  for (const auto& box : inboxes_) n += box.size();
  return n;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> ScriptedTransport::busy_channels() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& [key, q] : channels_) {
    if (!q.empty()) out.push_back(key);
  }
  return out;
}

void ScriptedTransport::deliver(std::uint32_t from, std::uint32_t to) {
  auto it = channels_.find({from, to});
  if (it == channels_.end() || it->second.empty()) {
    throw TransportError("channel " + std::to_string(from) + " -> " + std::to_string(to) + " is empty");
  }
  inboxes_[to].push_back(std::move(it->second.front()));
  it->second.pop_front();
}

void ScriptedTransport::deliver_all() {
  for (auto& [key, q] : channels_) {
    while (!q.empty()) {
      inboxes_[key.second].push_back(std::move(q.front()));
      q.pop_front();
    }
  }
}

}  // namespace dbrs
