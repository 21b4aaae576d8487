#include "qkd4/channel.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "qkd4/wire.hpp"

namespace qkd4 {

// ---------------------------------------------------------------------------
// In-memory transport

class MemoryChannelPair::Endpoint : public DuplexChannel {
 public:
  Endpoint(std::shared_ptr<Queue> out, std::shared_ptr<Queue> in)
      : out_(std::move(out)), in_(std::move(in)) {}

  void send_frame(const std::vector<std::uint8_t>& frame) override {
    {
      std::lock_guard lock(out_->mutex);
      if (out_->closed) throw ChannelClosedError("send on closed channel");
      out_->frames.push_back(frame);
    }
    out_->ready.notify_one();
  }

  std::vector<std::uint8_t> recv_frame() override {
    std::unique_lock lock(in_->mutex);
    in_->ready.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
    if (in_->frames.empty()) throw ChannelClosedError("peer closed the channel");
    std::vector<std::uint8_t> frame = std::move(in_->frames.front());
    in_->frames.pop_front();
    return frame;
  }

  void close() override {
    for (const auto& queue : {out_, in_}) {
      {
        std::lock_guard lock(queue->mutex);
        queue->closed = true;
      }
      queue->ready.notify_all();
    }
  }

 private:
  std::shared_ptr<Queue> out_;
  std::shared_ptr<Queue> in_;
};

MemoryChannelPair::MemoryChannelPair()
    : a_to_b_(std::make_shared<Queue>()),
      b_to_a_(std::make_shared<Queue>()),
      end_a_(std::make_unique<Endpoint>(a_to_b_, b_to_a_)),
      end_b_(std::make_unique<Endpoint>(b_to_a_, a_to_b_)) {}

// ---------------------------------------------------------------------------
// TCP transport

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

class TcpChannel : public DuplexChannel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override { close(); }

  void send_frame(const std::vector<std::uint8_t>& frame) override {
    std::size_t off = 0;
    while (off < frame.size()) {
      const ssize_t n =
          ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EPIPE || errno == ECONNRESET) {
          throw ChannelClosedError("peer closed the connection");
        }
        throw_errno("send");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::vector<std::uint8_t> recv_frame() override {
    std::vector<std::uint8_t> frame(4);
    read_exact(frame.data(), 4, /*at_frame_boundary=*/true);
    const std::uint32_t length = (static_cast<std::uint32_t>(frame[0]) << 24) |
                                 (static_cast<std::uint32_t>(frame[1]) << 16) |
                                 (static_cast<std::uint32_t>(frame[2]) << 8) |
                                 static_cast<std::uint32_t>(frame[3]);
    if (length > kMaxPayloadBytes) {
      throw MalformedFrameError("length prefix exceeds the 64 MiB frame limit");
    }
    frame.resize(4 + length);
    read_exact(frame.data() + 4, length, /*at_frame_boundary=*/false);
    return frame;
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void read_exact(std::uint8_t* out, std::size_t want, bool at_frame_boundary) {
    std::size_t got = 0;
    while (got < want) {
      const ssize_t n = ::recv(fd_, out + got, want - got, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == ECONNRESET) throw ChannelClosedError("peer reset the connection");
        throw_errno("recv");
      }
      if (n == 0) {
        if (at_frame_boundary && got == 0) {
          throw ChannelClosedError("peer closed the connection");
        }
        throw MalformedFrameError("stream ended inside a frame");
      }
      got += static_cast<std::size_t>(n);
    }
  }

  int fd_ = -1;
};

} // namespace

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  const int yes = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::invalid_argument("TcpListener: invalid IPv4 address '" + host + "'");
  }
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("bind " + host + ":" + std::to_string(port));
  }
  if (::listen(fd_, 1) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("listen");
  }

  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("getsockname");
  }
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<DuplexChannel> TcpListener::accept() {
  while (true) {
    const int client = ::accept(fd_, nullptr, nullptr);
    if (client >= 0) return std::make_unique<TcpChannel>(client);
    if (errno != EINTR) throw_errno("accept");
  }
}

std::unique_ptr<DuplexChannel> tcp_connect(const std::string& host, std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw std::invalid_argument("tcp_connect: invalid IPv4 address '" + host + "'");
  }
  while (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno == EINTR) continue;
    const int saved = errno;
    ::close(fd);
    errno = saved;
    throw_errno("connect " + host + ":" + std::to_string(port));
  }
  return std::make_unique<TcpChannel>(fd);
}

// ---------------------------------------------------------------------------
// Transcript recording

void TranscriptChannel::send_frame(const std::vector<std::uint8_t>& frame) {
  inner_.send_frame(frame);
  sent_.insert(sent_.end(), frame.begin(), frame.end());
}

std::vector<std::uint8_t> TranscriptChannel::recv_frame() {
  std::vector<std::uint8_t> frame = inner_.recv_frame();
  received_.insert(received_.end(), frame.begin(), frame.end());
  return frame;
}

} // namespace qkd4
