#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "qkd4/rng.hpp"
#include "qkd4/wire.hpp"

using namespace qkd4;

namespace {

std::vector<std::uint8_t> frame_of(const std::string& payload) {
  const auto length = static_cast<std::uint32_t>(payload.size());
  std::vector<std::uint8_t> frame = {
      static_cast<std::uint8_t>(length >> 24), static_cast<std::uint8_t>(length >> 16),
      static_cast<std::uint8_t>(length >> 8), static_cast<std::uint8_t>(length)};
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

std::vector<std::uint64_t> random_increasing(RngStream& rng, std::size_t n) {
  std::vector<std::uint64_t> out;
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < n; ++i) {
    value += 1 + rng.index(10);
    out.push_back(value);
  }
  return out;
}

} // namespace

TEST_CASE("every message type survives an encode/decode round-trip") {
  const BasisAnnounce basis{12, {0, 3, 1, 2, 2}};
  const SiftIndices sift{{1, 5, 6, 40}};
  const SampleDisclosure sample{{DisclosedRound{2, 1, std::nullopt},
                                 DisclosedRound{7, std::nullopt, 0},
                                 DisclosedRound{9, 0, 1}}};
  QberReport report;
  report.pol_qber = 0.125;
  report.symbol_error = 0.375;
  report.disclosed_rounds = 3;
  const AbortMessage abort_msg{"error rate above threshold"};

  CHECK(std::get<BasisAnnounce>(decode_message(encode_message(basis))) == basis);
  CHECK(std::get<SiftIndices>(decode_message(encode_message(sift))) == sift);
  CHECK(std::get<SampleDisclosure>(decode_message(encode_message(sample))) == sample);
  CHECK(std::get<QberReport>(decode_message(encode_message(report))) == report);
  CHECK(std::get<AbortMessage>(decode_message(encode_message(abort_msg))) == abort_msg);

  CHECK(message_type_name(basis) == "basis_announce");
  CHECK(message_type_name(sift) == "sift_indices");
  CHECK(message_type_name(sample) == "sample_disclosure");
  CHECK(message_type_name(report) == "qber_report");
  CHECK(message_type_name(abort_msg) == "abort");
}

TEST_CASE("frame bytes are pinned: sorted keys behind a big-endian prefix") {
  const BasisAnnounce msg{0, {0, 3, 1, 2}};
  const std::string payload =
      R"({"first_round":0,"settings":[0,3,1,2],"type":"basis_announce"})";
  const std::vector<std::uint8_t> frame = encode_message(msg);
  CHECK(frame == frame_of(payload));
  REQUIRE(frame.size() == payload.size() + 4);
  CHECK(frame[0] == 0);
  CHECK(frame[1] == 0);
  CHECK(frame[2] == 0);
  CHECK(frame[3] == payload.size());

  // Re-encoding is byte-stable.
  CHECK(encode_message(msg) == frame);
}

TEST_CASE("unknown fields are ignored for forward compatibility") {
  const auto decoded = decode_message(frame_of(
      R"({"disclosed_rounds":2,"future_hint":"x","pol_qber":0.5,"type":"qber_report"})"));
  const auto& report = std::get<QberReport>(decoded);
  CHECK(report.disclosed_rounds == 2);
  CHECK(report.pol_qber == 0.5);
  CHECK_FALSE(report.spa_qber.has_value());
}

TEST_CASE("malformed frames are rejected") {
  // Shorter than the length prefix itself.
  CHECK_THROWS_AS(decode_message({0, 0}), MalformedFrameError);

  // Prefix larger than the payload guard.
  CHECK_THROWS_AS(decode_message({0xFF, 0xFF, 0xFF, 0xFF}), MalformedFrameError);

  // Prefix disagrees with the actual payload size.
  std::vector<std::uint8_t> truncated = encode_message(AbortMessage{"x"});
  truncated.pop_back();
  CHECK_THROWS_AS(decode_message(truncated), MalformedFrameError);

  // Not UTF-8.
  std::vector<std::uint8_t> garbage = {0, 0, 0, 2, 0xFF, 0xFE};
  CHECK_THROWS_AS(decode_message(garbage), MalformedFrameError);

  // Valid JSON, nonsense content.
  CHECK_THROWS_AS(decode_message(frame_of("[1,2,3]")), MalformedFrameError);
  CHECK_THROWS_AS(decode_message(frame_of(R"({"type":"handshake"})")), MalformedFrameError);
  CHECK_THROWS_AS(decode_message(frame_of(R"({"type":"basis_announce"})")),
                  MalformedFrameError);
  CHECK_THROWS_AS(
      decode_message(frame_of(R"({"first_round":0,"settings":[4],"type":"basis_announce"})")),
      MalformedFrameError);
  CHECK_THROWS_AS(
      decode_message(frame_of(R"({"first_round":-1,"settings":[],"type":"basis_announce"})")),
      MalformedFrameError);
  CHECK_THROWS_AS(decode_message(frame_of(R"({"indices":[3,3],"type":"sift_indices"})")),
                  MalformedFrameError);
  CHECK_THROWS_AS(
      decode_message(frame_of(R"({"rounds":[{"index":1}],"type":"sample_disclosure"})")),
      MalformedFrameError);
  CHECK_THROWS_AS(
      decode_message(frame_of(
          R"({"rounds":[{"index":4,"pol":0},{"index":2,"pol":1}],"type":"sample_disclosure"})")),
      MalformedFrameError);
  CHECK_THROWS_AS(
      decode_message(frame_of(R"({"rounds":[{"index":1,"pol":2}],"type":"sample_disclosure"})")),
      MalformedFrameError);
  CHECK_THROWS_AS(
      decode_message(frame_of(R"({"disclosed_rounds":1,"pol_qber":1.5,"type":"qber_report"})")),
      MalformedFrameError);
  CHECK_THROWS_AS(decode_message(frame_of(R"({"type":"abort"})")), MalformedFrameError);
}

TEST_CASE("random messages round-trip") {
  RngStream rng(123456);
  for (int trial = 0; trial < 1000; ++trial) {
    ClassicalMessage msg;
    switch (rng.index(5)) {
      case 0: {
        BasisAnnounce m;
        m.first_round = rng.bits() >> 1;
        const std::size_t n = rng.index(50);
        for (std::size_t i = 0; i < n; ++i) {
          m.setting_ids.push_back(static_cast<std::uint8_t>(rng.index(4)));
        }
        msg = m;
        break;
      }
      case 1: {
        msg = SiftIndices{random_increasing(rng, rng.index(50))};
        break;
      }
      case 2: {
        SampleDisclosure m;
        for (const std::uint64_t index : random_increasing(rng, rng.index(20))) {
          DisclosedRound r;
          r.index = index;
          const std::uint64_t shape = rng.index(3);
          if (shape != 1) r.pol_bit = static_cast<int>(rng.index(2));
          if (shape != 0) r.spa_bit = static_cast<int>(rng.index(2));
          m.rounds.push_back(r);
        }
        msg = m;
        break;
      }
      case 3: {
        QberReport m;
        m.disclosed_rounds = rng.index(1000);
        if (rng.bernoulli(0.7)) m.pol_qber = rng.uniform();
        if (rng.bernoulli(0.7)) m.spa_qber = rng.uniform();
        if (rng.bernoulli(0.3)) m.symbol_error = rng.uniform();
        msg = m;
        break;
      }
      default: {
        std::string reason = "reason-";
        const std::size_t n = rng.index(30);
        for (std::size_t i = 0; i < n; ++i) {
          reason.push_back(static_cast<char>('a' + rng.index(26)));
        }
        msg = AbortMessage{reason};
        break;
      }
    }
    const ClassicalMessage back = decode_message(encode_message(msg));
    CHECK(back == msg);
  }
}

TEST_CASE("non-ascii abort reasons survive the trip") {
  const AbortMessage msg{"Schwelle überschritten — stop"};
  CHECK(std::get<AbortMessage>(decode_message(encode_message(msg))) == msg);
}
