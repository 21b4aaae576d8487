#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qkd4 {

/// Batched announcement of one party's measurement settings for the rounds
/// [first_round, first_round + setting_ids.size()); ids follow
/// MeasurementSetting::id().
struct BasisAnnounce {
  std::uint64_t first_round = 0;
  std::vector<std::uint8_t> setting_ids;

  bool operator==(const BasisAnnounce&) const = default;
};

/// Strictly increasing list of round indices both parties keep after sifting.
struct SiftIndices {
  std::vector<std::uint64_t> indices;

  bool operator==(const SiftIndices&) const = default;
};

/// All bits a party kept for one disclosed round. A DOF that was not kept in
/// that round stays unset.
struct DisclosedRound {
  std::uint64_t index = 0;
  std::optional<int> pol_bit;
  std::optional<int> spa_bit;

  bool operator==(const DisclosedRound&) const = default;
};

/// Sacrificed sample for error estimation; indices strictly increasing and a
/// subset of the kept set. Disclosed bits are dropped from the final key.
struct SampleDisclosure {
  std::vector<DisclosedRound> rounds;

  bool operator==(const SampleDisclosure&) const = default;
};

/// Error rates estimated from the disclosed sample. A rate is unset when the
/// sample contained no bits of that kind.
struct QberReport {
  std::optional<double> pol_qber;
  std::optional<double> spa_qber;
  std::optional<double> symbol_error;
  std::uint64_t disclosed_rounds = 0;

  bool operator==(const QberReport&) const = default;
};

struct AbortMessage {
  std::string reason;

  bool operator==(const AbortMessage&) const = default;
};

using ClassicalMessage =
    std::variant<BasisAnnounce, SiftIndices, SampleDisclosure, QberReport, AbortMessage>;

/// Raised on any frame that cannot be decoded: short/oversized length prefix,
/// invalid UTF-8 or JSON, unknown message type, or schema violations such as
/// non-increasing index lists. Unknown extra fields are NOT an error; they
/// are ignored for forward compatibility.
class MalformedFrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Upper bound on the JSON payload size accepted by decoders (64 MiB). Guards
/// against nonsense length prefixes on a corrupted stream.
inline constexpr std::uint32_t kMaxPayloadBytes = 64u * 1024u * 1024u;

/// UTF-8 JSON payload with deterministic key order, no framing.
std::vector<std::uint8_t> encode_payload(const ClassicalMessage& msg);
ClassicalMessage decode_payload(const std::uint8_t* data, std::size_t size);

/// Full wire frame: 4-byte big-endian payload length followed by the payload.
std::vector<std::uint8_t> encode_message(const ClassicalMessage& msg);

/// Decodes one full frame (prefix + payload). The frame must contain exactly
/// the bytes announced by its prefix.
ClassicalMessage decode_message(const std::vector<std::uint8_t>& frame);

/// Human-readable tag also used as the JSON "type" field.
std::string message_type_name(const ClassicalMessage& msg);

} // namespace qkd4
