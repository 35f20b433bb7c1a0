#include "wordorder/external_scorer.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <limits>
#include <stdexcept>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace wordorder {

using json = nlohmann::json;

namespace {

std::string errno_text() { return std::strerror(errno); }

}  // namespace

void FdChannel::send_line(const std::string& line) {
  std::string data = line + '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("write to " + describe() + " failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string FdChannel::receive_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw std::runtime_error("timeout waiting for " + describe());
    pollfd pfd{read_fd_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("poll on " + describe() + " failed: " + errno_text());
    }
    if (ready == 0) throw std::runtime_error("timeout waiting for " + describe());
    char chunk[4096];
    ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("read from " + describe() + " failed: " + errno_text());
    }
    if (n == 0) throw std::runtime_error(describe() + " closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ProcessChannel::ProcessChannel(std::string command) : command_(std::move(command)) {
  // A dead child must surface as a write error, not kill the caller.
  std::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw std::runtime_error("pipe: " + errno_text());
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw std::runtime_error("pipe: " + errno_text());
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
    throw std::runtime_error("fork: " + errno_text());
  }
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  pid_ = pid;
  ::close(to_child[0]);
  ::close(from_child[1]);
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
}

ProcessChannel::~ProcessChannel() {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(10000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

SocketChannel::SocketChannel(const std::string& endpoint) : endpoint_(endpoint) {
  auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("socket endpoint must be host:port, got '" + endpoint + "'");
  std::string host = endpoint.substr(0, colon);
  std::string port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("resolve " + endpoint + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw std::runtime_error("cannot connect to " + endpoint);
  std::signal(SIGPIPE, SIG_IGN);
  read_fd_ = fd;
  write_fd_ = fd;
}

SocketChannel::~SocketChannel() {
  if (read_fd_ >= 0) ::close(read_fd_);
}

std::string CallbackChannel::receive_line(std::chrono::milliseconds) {
  if (pending_.empty()) throw std::runtime_error("callback channel has no pending reply");
  std::string line = std::move(pending_.front());
  pending_.pop_front();
  return line;
}

namespace {

json parse_reply(const std::string& line, std::uint64_t id, const std::string& who) {
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::exception& e) {
    throw ScorerError(who, std::string("malformed reply: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_unsigned()) {
    throw ScorerError(who, "malformed reply: missing id");
  }
  if (reply["id"].get<std::uint64_t>() != id) {
    throw ScorerError(who, "reply id " + reply["id"].dump() + " does not match request id " + std::to_string(id));
  }
  if (reply.contains("error")) {
    throw ScorerError(who, "remote error: " +
                               (reply["error"].is_string() ? reply["error"].get<std::string>() : reply["error"].dump()));
  }
  return reply;
}

}  // namespace

Vocabulary handshake(LineChannel& channel, std::uint64_t id, std::chrono::milliseconds timeout) {
  const std::string who = "external(" + channel.describe() + ")";
  json hello = {{"id", id}, {"method", "hello"}, {"version", kProtocolVersion}};
  std::string line;
  try {
    channel.send_line(hello.dump());
    line = channel.receive_line(timeout);
  } catch (const ScorerError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScorerError(who, std::string("handshake transport failure: ") + e.what());
  }
  json reply = parse_reply(line, id, who);
  if (reply.contains("version") && reply["version"] != kProtocolVersion) {
    throw ScorerError(who, "protocol version mismatch: expected " + std::to_string(kProtocolVersion) + ", got " +
                               reply["version"].dump());
  }
  if (!reply.contains("vocab") || !reply["vocab"].is_array()) throw ScorerError(who, "hello reply lacks vocab");
  std::vector<std::string> tokens;
  for (const auto& t : reply["vocab"]) {
    if (!t.is_string()) throw ScorerError(who, "vocab entries must be strings");
    tokens.push_back(t.get<std::string>());
  }
  try {
    return Vocabulary::from_tokens(tokens);
  } catch (const std::invalid_argument& e) {
    throw ScorerError(who, e.what());
  }
}

ExternalScorer::ExternalScorer(std::unique_ptr<LineChannel> channel, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  vocab_ = handshake(*channel_, next_id_++, timeout_);
}

std::uint64_t ExternalScorer::last_request_id() const {
  std::lock_guard lock(mutex_);
  return next_id_ - 1;
}

std::string ExternalScorer::roundtrip(const std::string& request, std::uint64_t) const {
  try {
    channel_->send_line(request);
    return channel_->receive_line(timeout_);
  } catch (const std::exception& e) {
    throw ScorerError(name(), std::string("transport failure: ") + e.what());
  }
}

std::vector<double> ExternalScorer::next_logprobs(std::span<const TokenId> prefix,
                                                  std::span<const TokenId> input) const {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = next_id_++;
  // The remote side only knows its own vocabulary; unknown words go out as <unk>.
  auto wire = [this](std::span<const TokenId> ids) {
    std::vector<TokenId> out(ids.begin(), ids.end());
    if (const auto unk = vocab_.unk()) {
      for (auto& t : out) {
        if (!vocab_.contains(t)) t = *unk;
      }
    }
    return out;
  };
  json request = {{"id", id}, {"method", "next_logprobs"}, {"prefix", wire(prefix)}, {"input", wire(input)}};
  json reply = parse_reply(roundtrip(request.dump(), id), id, name());
  if (!reply.contains("logprobs") || !reply["logprobs"].is_array()) {
    throw ScorerError(name(), "malformed reply: missing logprobs");
  }
  const auto& lp = reply["logprobs"];
  if (lp.size() != vocab_.size()) {
    throw ScorerError(name(), "malformed reply: " + std::to_string(lp.size()) + " logprobs for vocabulary of " +
                                  std::to_string(vocab_.size()));
  }
  std::vector<double> out;
  out.reserve(lp.size());
  for (const auto& v : lp) {
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_null() || (v.is_string() && (v == "-inf" || v == "-Infinity"))) {
      out.push_back(-std::numeric_limits<double>::infinity());
    } else {
      throw ScorerError(name(), "malformed reply: non-numeric logprob " + v.dump());
    }
    if (std::isnan(out.back()) || out.back() > 1e-9) throw ScorerError(name(), "malformed reply: invalid logprob");
  }
  // Remote models commonly compute in single precision.
  if (std::abs(logsumexp(out)) > 1e-3) throw ScorerError(name(), "malformed reply: logprobs are not normalized");
  return out;
}

}  // namespace wordorder
