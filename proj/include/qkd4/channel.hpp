#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkd4 {

/// Raised when reading from or writing to a channel whose peer has closed.
class ChannelClosedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bidirectional, ordered, reliable frame transport between Alice and Bob.
/// Frames are full wire frames (length prefix included). One thread may send
/// while another receives; individual calls are not reentrant.
class DuplexChannel {
 public:
  virtual ~DuplexChannel() = default;

  virtual void send_frame(const std::vector<std::uint8_t>& frame) = 0;

  /// Blocks until a full frame arrives. Throws ChannelClosedError on orderly
  /// shutdown between frames and MalformedFrameError if the stream dies or
  /// lies mid-frame.
  virtual std::vector<std::uint8_t> recv_frame() = 0;

  virtual void close() = 0;
};

/// Two in-process endpoints connected by FIFO queues; the reference
/// transport for tests.
class MemoryChannelPair {
 public:
  MemoryChannelPair();

  DuplexChannel& end_a() { return *end_a_; }
  DuplexChannel& end_b() { return *end_b_; }

 private:
  struct Queue {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::vector<std::uint8_t>> frames;
    bool closed = false;
  };

  class Endpoint;

  std::shared_ptr<Queue> a_to_b_;
  std::shared_ptr<Queue> b_to_a_;
  std::unique_ptr<DuplexChannel> end_a_;
  std::unique_ptr<DuplexChannel> end_b_;
};

/// Listening IPv4 TCP socket. Construct with port 0 to bind an ephemeral
/// port, then read it back with port().
class TcpListener {
 public:
  explicit TcpListener(const std::string& host = "127.0.0.1", std::uint16_t port = 0);
  ~TcpListener();

  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }

  /// Blocks for one inbound connection.
  std::unique_ptr<DuplexChannel> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<DuplexChannel> tcp_connect(const std::string& host, std::uint16_t port);

/// Decorator that records every frame crossing an endpoint, concatenated in
/// order per direction. Lets tests compare transports byte for byte.
class TranscriptChannel : public DuplexChannel {
 public:
  explicit TranscriptChannel(DuplexChannel& inner) : inner_(inner) {}

  void send_frame(const std::vector<std::uint8_t>& frame) override;
  std::vector<std::uint8_t> recv_frame() override;
  void close() override { inner_.close(); }

  const std::vector<std::uint8_t>& sent_bytes() const { return sent_; }
  const std::vector<std::uint8_t>& received_bytes() const { return received_; }

 private:
  DuplexChannel& inner_;
  std::vector<std::uint8_t> sent_;
  std::vector<std::uint8_t> received_;
};

} // namespace qkd4
