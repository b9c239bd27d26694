#include "pttag/remote_scorer.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "pttag/errors.hpp"

namespace pttag {

using nlohmann::json;

namespace {

constexpr int kHandshakeTimeoutMs = 30000;
constexpr int kIoTimeoutMs = 120000;

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  if (flags < 0 || fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) {
    throw BackendError(std::string("fcntl: ") + std::strerror(errno));
  }
}

int connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw BackendError("sidecar " + host + ":" + port + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) throw BackendError("sidecar " + host + ":" + port + " is unreachable");
  return fd;
}

}  // namespace

// Bidirectional line channel over a socket or a child process's pipes.
class RemoteScorer::Channel {
 public:
  explicit Channel(const std::string& address) {
    if (address.rfind("tcp:", 0) == 0) {
      const std::string rest = address.substr(4);
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
        throw ConfigError("sidecar address must be tcp:<host>:<port>, got " + address);
      }
      read_fd_ = write_fd_ = connect_tcp(rest.substr(0, colon), rest.substr(colon + 1));
    } else if (address.rfind("stdio:", 0) == 0) {
      spawn(address.substr(6));
    } else {
      throw ConfigError("unknown sidecar address scheme: " + address);
    }
    set_nonblocking(read_fd_);
    if (write_fd_ != read_fd_) set_nonblocking(write_fd_);
  }

  ~Channel() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (child_ > 0) {
      // Closing stdin asks the sidecar to exit; give it a moment.
      for (int i = 0; i < 50; ++i) {
        if (waitpid(child_, nullptr, WNOHANG) == child_) return;
        usleep(10000);
      }
      kill(child_, SIGTERM);
      waitpid(child_, nullptr, 0);
    }
  }

  // Writes `out` while collecting complete lines until `wanted` have arrived.
  std::vector<std::string> exchange(const std::string& out, std::size_t wanted, int timeout_ms) {
    std::vector<std::string> lines;
    std::size_t written = 0;
    while (lines.size() < wanted || written < out.size()) {
      take_buffered_lines(lines, wanted);
      if (lines.size() >= wanted && written >= out.size()) break;

      pollfd fds[2];
      nfds_t n = 0;
      const bool want_write = written < out.size();
      const bool want_read = lines.size() < wanted;
      if (read_fd_ == write_fd_) {
        fds[n++] = {read_fd_, static_cast<short>((want_read ? POLLIN : 0) |
                                                 (want_write ? POLLOUT : 0)), 0};
      } else {
        if (want_read) fds[n++] = {read_fd_, POLLIN, 0};
        if (want_write) fds[n++] = {write_fd_, POLLOUT, 0};
      }
      const int rc = poll(fds, n, timeout_ms);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw BackendError(std::string("sidecar poll: ") + std::strerror(errno));
      }
      if (rc == 0) throw BackendError("sidecar timed out");
      for (nfds_t i = 0; i < n; ++i) {
        const short ev = fds[i].revents;
        if (fds[i].fd == write_fd_ && want_write) {
          if (ev & POLLOUT) {
            const ssize_t k = ::write(write_fd_, out.data() + written, out.size() - written);
            if (k < 0 && errno != EAGAIN && errno != EINTR) {
              throw BackendError(std::string("sidecar write: ") + std::strerror(errno));
            }
            if (k > 0) written += static_cast<std::size_t>(k);
          } else if (read_fd_ != write_fd_ && (ev & (POLLERR | POLLHUP))) {
            throw BackendError("sidecar closed its input");
          }
        }
        if (fds[i].fd == read_fd_ && want_read && (ev & (POLLIN | POLLHUP | POLLERR))) {
          char buf[65536];
          const ssize_t k = ::read(read_fd_, buf, sizeof buf);
          if (k == 0) throw BackendError("sidecar closed the connection");
          if (k < 0 && errno != EAGAIN && errno != EINTR) {
            throw BackendError(std::string("sidecar read: ") + std::strerror(errno));
          }
          if (k > 0) pending_.append(buf, static_cast<std::size_t>(k));
        }
      }
    }
    return lines;
  }

 private:
  void take_buffered_lines(std::vector<std::string>& lines, std::size_t wanted) {
    std::size_t start = 0;
    while (lines.size() < wanted) {
      const auto nl = pending_.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = pending_.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      start = nl + 1;
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      lines.push_back(std::move(line));
    }
    pending_.erase(0, start);
  }

  void spawn(const std::string& command) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
      throw BackendError(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) throw BackendError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    child_ = pid;
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  int read_fd_ = -1;
  int write_fd_ = -1;
  pid_t child_ = -1;
  std::string pending_;
};

RemoteScorer::RemoteScorer(const std::string& address) {
  // A sidecar that dies mid-write must surface as an error, not SIGPIPE.
  signal(SIGPIPE, SIG_IGN);
  channel_ = std::make_unique<Channel>(address);
  const auto lines = channel_->exchange({}, 1, kHandshakeTimeoutMs);
  const json hello = json::parse(lines.front(), nullptr, false);
  if (hello.is_discarded() || !hello.is_object() || !hello.contains("protocol_version") ||
      !hello.contains("descriptor")) {
    throw BackendError("sidecar handshake is malformed: " + lines.front());
  }
  if (hello["protocol_version"] != kSidecarProtocolVersion) {
    throw BackendError("sidecar speaks protocol version " + hello["protocol_version"].dump() +
                       ", expected " + std::to_string(kSidecarProtocolVersion));
  }
  try {
    descriptor_ = ScorerDescriptor::from_json(hello["descriptor"]);
  } catch (const ConfigError& e) {
    throw BackendError(std::string("sidecar descriptor: ") + e.what());
  }
}

RemoteScorer::~RemoteScorer() = default;

std::vector<ScoreVector> RemoteScorer::score_batch(std::span<const ModelInput> inputs) const {
  if (inputs.empty()) return {};
  std::string requests;
  for (const auto& in : inputs) {
    requests += json{{"id", in.citation_id}, {"text", in.text}}.dump();
    requests += '\n';
  }

  std::vector<std::string> lines;
  {
    std::lock_guard lock(mutex_);
    lines = channel_->exchange(requests, inputs.size(), kIoTimeoutMs);
  }

  std::vector<ScoreVector> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const json r = json::parse(lines[i], nullptr, false);
    if (r.is_discarded() || !r.is_object() || !r.contains("id") || !r["id"].is_string()) {
      throw BackendError("sidecar sent a malformed response: " + lines[i]);
    }
    if (r["id"] != inputs[i].citation_id) {
      throw BackendError("sidecar answered out of order: expected id " + inputs[i].citation_id +
                         ", got " + r["id"].get<std::string>());
    }
    auto& v = out[i];
    v.citation_id = inputs[i].citation_id;
    if (r.contains("error")) {
      v.error = r["error"].is_string() ? r["error"].get<std::string>() : r["error"].dump();
      continue;
    }
    if (!r.contains("scores") || !r["scores"].is_object()) {
      v.error = "response has no scores";
      continue;
    }
    for (const auto& label : descriptor_.vocabulary) {
      auto it = r["scores"].find(label);
      if (it == r["scores"].end() || !it->is_number()) {
        v.error = "response lacks a score for \"" + label + "\"";
        break;
      }
      const double s = it->get<double>();
      if (!(s >= 0.0 && s <= 1.0)) {
        v.error = "score for \"" + label + "\" is outside [0,1]";
        break;
      }
      v.scores[label] = s;
    }
    if (!v.ok()) v.scores.clear();
  }
  return out;
}

}  // namespace pttag
