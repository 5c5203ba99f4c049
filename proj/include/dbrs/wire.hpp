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

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbrs {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kEnvelopeHeaderBytes = 4 + 1 + 1 + 4 + 4 + 8 + 4;
inline constexpr std::size_t kTokenBodyBytes = 4 + 8 + 8 + 8;

enum class EnvelopeKind : std::uint8_t { bp_message = 0, token = 1, shutdown = 2, belief_report = 3 };

struct TokenState {
  std::uint32_t clean_cycles = 0;
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t epoch = 0;

  bool operator==(const TokenState&) const = default;
};

/// One framed unit on the wire.  For BP messages and belief reports src/dst
/// are vertex ids; for tokens and shutdowns they are worker ids.
struct Envelope {
  EnvelopeKind kind = EnvelopeKind::bp_message;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint64_t sequence = 0;
  /// linear-space probabilities (belief reports append U_i)
  std::vector<double> payload;
  /// only meaningful for tokens; serialized after the payload
  TokenState token;

  bool operator==(const Envelope&) const = default;
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void encode_envelope(const Envelope& env, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode_envelope(const Envelope& env);

/// Decode one envelope starting at `offset`; advances `offset` past it.
Envelope decode_envelope(std::span<const std::uint8_t> bytes, std::size_t& offset);
/// Decode a batch of back-to-back envelopes.
std::vector<Envelope> decode_batch(std::span<const std::uint8_t> bytes);

}  // namespace dbrs
