#include "qkd4/wire.hpp"

#include <json.hpp>

namespace qkd4 {

namespace {

using nlohmann::json;

constexpr const char* kTypeBasisAnnounce = "basis_announce";
constexpr const char* kTypeSiftIndices = "sift_indices";
constexpr const char* kTypeSampleDisclosure = "sample_disclosure";
constexpr const char* kTypeQberReport = "qber_report";
constexpr const char* kTypeAbort = "abort";

json to_json(const BasisAnnounce& msg) {
  json j;
  j["type"] = kTypeBasisAnnounce;
  j["first_round"] = msg.first_round;
  j["settings"] = msg.setting_ids;
  return j;
}

json to_json(const SiftIndices& msg) {
  json j;
  j["type"] = kTypeSiftIndices;
  j["indices"] = msg.indices;
  return j;
}

json to_json(const SampleDisclosure& msg) {
  json j;
  j["type"] = kTypeSampleDisclosure;
  json rounds = json::array();
  for (const auto& r : msg.rounds) {
    json entry;
    entry["index"] = r.index;
    if (r.pol_bit) entry["pol"] = *r.pol_bit;
    if (r.spa_bit) entry["spa"] = *r.spa_bit;
    rounds.push_back(std::move(entry));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

json to_json(const QberReport& msg) {
  json j;
  j["type"] = kTypeQberReport;
  j["disclosed_rounds"] = msg.disclosed_rounds;
  if (msg.pol_qber) j["pol_qber"] = *msg.pol_qber;
  if (msg.spa_qber) j["spa_qber"] = *msg.spa_qber;
  if (msg.symbol_error) j["symbol_error"] = *msg.symbol_error;
  return j;
}

json to_json(const AbortMessage& msg) {
  json j;
  j["type"] = kTypeAbort;
  j["reason"] = msg.reason;
  return j;
}

[[noreturn]] void fail(const std::string& what) { throw MalformedFrameError(what); }

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(std::string("missing required field '") + key + "'");
  return *it;
}

std::uint64_t as_u64(const json& j, const char* key) {
  const json& field = require(j, key);
  if (!field.is_number_unsigned()) {
    fail(std::string("field '") + key + "' must be a non-negative integer");
  }
  return field.get<std::uint64_t>();
}

int as_bit(const json& field, const char* key) {
  if (!field.is_number_integer()) fail(std::string("field '") + key + "' must be 0 or 1");
  const auto value = field.get<std::int64_t>();
  if (value != 0 && value != 1) fail(std::string("field '") + key + "' must be 0 or 1");
  return static_cast<int>(value);
}

double as_rate(const json& field, const char* key) {
  if (!field.is_number()) fail(std::string("field '") + key + "' must be a number");
  const double value = field.get<double>();
  if (!(value >= 0.0 && value <= 1.0)) {
    fail(std::string("field '") + key + "' must lie in [0, 1]");
  }
  return value;
}

void require_strictly_increasing(const std::vector<std::uint64_t>& indices) {
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] <= indices[i - 1]) fail("index list must be strictly increasing");
  }
}

ClassicalMessage from_json(const json& j) {
  if (!j.is_object()) fail("payload must be a JSON object");
  const json& type = require(j, "type");
  if (!type.is_string()) fail("field 'type' must be a string");
  const std::string name = type.get<std::string>();

  if (name == kTypeBasisAnnounce) {
    BasisAnnounce msg;
    msg.first_round = as_u64(j, "first_round");
    const json& settings = require(j, "settings");
    if (!settings.is_array()) fail("field 'settings' must be an array");
    msg.setting_ids.reserve(settings.size());
    for (const auto& entry : settings) {
      if (!entry.is_number_unsigned() || entry.get<std::uint64_t>() > 3) {
        fail("setting ids must be integers in [0, 3]");
      }
      msg.setting_ids.push_back(entry.get<std::uint8_t>());
    }
    return msg;
  }
  if (name == kTypeSiftIndices) {
    SiftIndices msg;
    const json& indices = require(j, "indices");
    if (!indices.is_array()) fail("field 'indices' must be an array");
    msg.indices.reserve(indices.size());
    for (const auto& entry : indices) {
      if (!entry.is_number_unsigned()) fail("indices must be non-negative integers");
      msg.indices.push_back(entry.get<std::uint64_t>());
    }
    require_strictly_increasing(msg.indices);
    return msg;
  }
  if (name == kTypeSampleDisclosure) {
    SampleDisclosure msg;
    const json& rounds = require(j, "rounds");
    if (!rounds.is_array()) fail("field 'rounds' must be an array");
    msg.rounds.reserve(rounds.size());
    std::vector<std::uint64_t> indices;
    indices.reserve(rounds.size());
    for (const auto& entry : rounds) {
      if (!entry.is_object()) fail("disclosed rounds must be objects");
      DisclosedRound r;
      r.index = as_u64(entry, "index");
      if (auto it = entry.find("pol"); it != entry.end()) r.pol_bit = as_bit(*it, "pol");
      if (auto it = entry.find("spa"); it != entry.end()) r.spa_bit = as_bit(*it, "spa");
      if (!r.pol_bit && !r.spa_bit) fail("disclosed round carries no bits");
      indices.push_back(r.index);
      msg.rounds.push_back(r);
    }
    require_strictly_increasing(indices);
    return msg;
  }
  if (name == kTypeQberReport) {
    QberReport msg;
    msg.disclosed_rounds = as_u64(j, "disclosed_rounds");
    if (auto it = j.find("pol_qber"); it != j.end()) msg.pol_qber = as_rate(*it, "pol_qber");
    if (auto it = j.find("spa_qber"); it != j.end()) msg.spa_qber = as_rate(*it, "spa_qber");
    if (auto it = j.find("symbol_error"); it != j.end()) {
      msg.symbol_error = as_rate(*it, "symbol_error");
    }
    return msg;
  }
  if (name == kTypeAbort) {
    AbortMessage msg;
    const json& reason = require(j, "reason");
    if (!reason.is_string()) fail("field 'reason' must be a string");
    msg.reason = reason.get<std::string>();
    return msg;
  }
  fail("unknown message type '" + name + "'");
}

} // namespace

std::vector<std::uint8_t> encode_payload(const ClassicalMessage& msg) {
  const json j = std::visit([](const auto& m) { return to_json(m); }, msg);
  // Keys serialize in sorted order, so equal messages yield equal bytes.
  const std::string text = j.dump();
  return {text.begin(), text.end()};
}

ClassicalMessage decode_payload(const std::uint8_t* data, std::size_t size) {
  json j;
  try {
    // nlohmann rejects invalid UTF-8 during parsing.
    j = json::parse(data, data + size);
  } catch (const json::parse_error& err) {
    fail(std::string("payload is not valid UTF-8 JSON: ") + err.what());
  }
  return from_json(j);
}

std::vector<std::uint8_t> encode_message(const ClassicalMessage& msg) {
  std::vector<std::uint8_t> payload = encode_payload(msg);
  if (payload.size() > kMaxPayloadBytes) {
    throw MalformedFrameError("payload exceeds the 64 MiB frame limit");
  }
  const auto length = static_cast<std::uint32_t>(payload.size());
  std::vector<std::uint8_t> frame;
  frame.reserve(payload.size() + 4);
  frame.push_back(static_cast<std::uint8_t>(length >> 24));
  frame.push_back(static_cast<std::uint8_t>(length >> 16));
  frame.push_back(static_cast<std::uint8_t>(length >> 8));
  frame.push_back(static_cast<std::uint8_t>(length));
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

ClassicalMessage decode_message(const std::vector<std::uint8_t>& frame) {
  if (frame.size() < 4) fail("frame shorter than the 4-byte length prefix");
  const std::uint32_t length = (static_cast<std::uint32_t>(frame[0]) << 24) |
                               (static_cast<std::uint32_t>(frame[1]) << 16) |
                               (static_cast<std::uint32_t>(frame[2]) << 8) |
                               static_cast<std::uint32_t>(frame[3]);
  if (length > kMaxPayloadBytes) fail("length prefix exceeds the 64 MiB frame limit");
  if (frame.size() - 4 != length) fail("frame length does not match its prefix");
  return decode_payload(frame.data() + 4, length);
}

std::string message_type_name(const ClassicalMessage& msg) {
  switch (msg.index()) {
    case 0: return kTypeBasisAnnounce;
    case 1: return kTypeSiftIndices;
    case 2: return kTypeSampleDisclosure;
    case 3: return kTypeQberReport;
    default: return kTypeAbort;
  }
}

} // namespace qkd4
