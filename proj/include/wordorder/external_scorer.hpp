#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "wordorder/scorer.hpp"

namespace wordorder {

inline constexpr int kProtocolVersion = 1;

// Bidirectional line transport. Lines exclude the trailing newline.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws std::runtime_error on EOF, I/O failure or timeout.
  virtual std::string receive_line(std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

// Shared read/write logic over a pair of file descriptors.
class FdChannel : public LineChannel {
 public:
  void send_line(const std::string& line) override;
  std::string receive_line(std::chrono::milliseconds timeout) override;

 protected:
  FdChannel() = default;
  int read_fd_ = -1;
  int write_fd_ = -1;

 private:
  std::string buffer_;
};

// Runs `command` through /bin/sh and talks to it over its stdin/stdout.
// The child's stderr is inherited.
class ProcessChannel final : public FdChannel {
 public:
  explicit ProcessChannel(std::string command);
  ~ProcessChannel() override;
  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;
  std::string describe() const override { return "process '" + command_ + "'"; }

 private:
  std::string command_;
  int pid_ = -1;
};

// TCP client; `endpoint` is "host:port".
class SocketChannel final : public FdChannel {
 public:
  explicit SocketChannel(const std::string& endpoint);
  ~SocketChannel() override;
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;
  std::string describe() const override { return "socket " + endpoint_; }

 private:
  std::string endpoint_;
};

// In-process channel: each sent line is answered by `handler`. Used for
// protocol stubs in tests and for Python-side scorers.
class CallbackChannel final : public LineChannel {
 public:
  using Handler = std::function<std::string(const std::string&)>;
  explicit CallbackChannel(Handler handler) : handler_(std::move(handler)) {}
  void send_line(const std::string& line) override { pending_.push_back(handler_(line)); }
  std::string receive_line(std::chrono::milliseconds timeout) override;
  std::string describe() const override { return "callback"; }

 private:
  Handler handler_;
  std::deque<std::string> pending_;
};

// Client side of the line-delimited JSON scoring protocol:
//
//   -> {"id": N, "method": "hello", "version": 1}
//   <- {"id": N, "vocab": [...], "version": 1}          ("version" optional)
//   -> {"id": N, "method": "next_logprobs", "prefix": [...], "input": [...]}
//   <- {"id": N, "logprobs": [...]}  or  {"id": N, "error": "..."}
//
// Log-probabilities may be JSON numbers, null, or the string "-inf" for
// impossible tokens. Requests are serialized through one connection; ids
// strictly increase and every reply must echo its request id.
class ExternalScorer final : public Scorer {
 public:
  // Performs the handshake; throws ScorerError on failure.
  ExternalScorer(std::unique_ptr<LineChannel> channel,
                 std::chrono::milliseconds timeout = std::chrono::seconds(60));

  const Vocabulary& vocabulary() const override { return vocab_; }
  std::string name() const override { return "external(" + channel_->describe() + ")"; }
  std::vector<double> next_logprobs(std::span<const TokenId> prefix,
                                    std::span<const TokenId> input) const override;

  std::uint64_t last_request_id() const;

 private:
  std::string roundtrip(const std::string& request, std::uint64_t id) const;

  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  Vocabulary vocab_;
  mutable std::mutex mutex_;
  mutable std::uint64_t next_id_ = 1;
};

// Exchanges the hello message and returns the advertised vocabulary.
Vocabulary handshake(LineChannel& channel, std::uint64_t id, std::chrono::milliseconds timeout);

}  // namespace wordorder
