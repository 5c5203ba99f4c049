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


#include "dbrs/wire.hpp"

#include <bit>
#include <cstring>

namespace dbrs {

namespace {

static_assert(std::endian::native == std::endian::little, "wire helpers assume a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw WireError("truncated envelope");
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

void encode_envelope(const Envelope& env, std::vector<std::uint8_t>& out) {
  out.insert(out.end(), {'D', 'B', 'R', 'S'});
  put<std::uint8_t>(out, kWireVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(env.kind));
  put<std::uint32_t>(out, env.src);
  put<std::uint32_t>(out, env.dst);
  put<std::uint64_t>(out, env.sequence);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(env.payload.size()));
  for (double p : env.payload) put<double>(out, p);
  if (env.kind == EnvelopeKind::token) {
    put<std::uint32_t>(out, env.token.clean_cycles);
    put<std::uint64_t>(out, env.token.sent);
    put<std::uint64_t>(out, env.token.received);
    put<std::uint64_t>(out, env.token.epoch);
  }
}

std::vector<std::uint8_t> encode_envelope(const Envelope& env) {
  std::vector<std::uint8_t> out;
  encode_envelope(env, out);
  return out;
}

Envelope decode_envelope(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  if (offset + 4 > bytes.size() || std::memcmp(bytes.data() + offset, "DBRS", 4) != 0) {
    throw WireError("bad envelope magic");
  }
  offset += 4;
  const auto version = take<std::uint8_t>(bytes, offset);
  if (version != kWireVersion) throw WireError("unsupported wire version " + std::to_string(version));
  const auto kind = take<std::uint8_t>(bytes, offset);
  if (kind > static_cast<std::uint8_t>(EnvelopeKind::belief_report)) {
    throw WireError("unknown envelope kind " + std::to_string(kind));
  }
  Envelope env;
  env.kind = static_cast<EnvelopeKind>(kind);
  env.src = take<std::uint32_t>(bytes, offset);
  env.dst = take<std::uint32_t>(bytes, offset);
  env.sequence = take<std::uint64_t>(bytes, offset);
  const auto len = take<std::uint32_t>(bytes, offset);
  if (offset + std::size_t{len} * sizeof(double) > bytes.size()) throw WireError("truncated payload");
  env.payload.resize(len);
  for (auto& p : env.payload) p = take<double>(bytes, offset);
  if (env.kind == EnvelopeKind::token) {
    env.token.clean_cycles = take<std::uint32_t>(bytes, offset);
    env.token.sent = take<std::uint64_t>(bytes, offset);
    env.token.received = take<std::uint64_t>(bytes, offset);
    env.token.epoch = take<std::uint64_t>(bytes, offset);
  }
  return env;
}

std::vector<Envelope> decode_batch(std::span<const std::uint8_t> bytes) {
  std::vector<Envelope> out;
  std::size_t offset = 0;
  while (offset < bytes.size()) out.push_back(decode_envelope(bytes, offset));
  return out;
}

}  // namespace dbrs
