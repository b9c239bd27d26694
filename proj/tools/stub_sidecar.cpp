// Stand-in scoring sidecar for tests and local runs. Speaks the sidecar
// protocol (newline-delimited JSON) on stdin/stdout, or on a TCP port with
// --listen. Scores come from stub_score() unless --score pins them.

#include <CLI11.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "pttag/corpus.hpp"
#include "pttag/remote_scorer.hpp"
#include "pttag/scorer.hpp"

namespace {

using nlohmann::json;

struct Behaviour {
  pttag::ScorerDescriptor descriptor;
  std::optional<double> fixed_score;
  std::set<std::string> fail_ids;
  int protocol_version = pttag::kSidecarProtocolVersion;
  bool garble = false;  // answer with a wrong id, for client error tests
};

json answer(const Behaviour& b, const std::string& line) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::parse_error& e) {
    return {{"id", nullptr}, {"error", std::string("malformed request: ") + e.what()}};
  }
  const std::string id = req.value("id", "");
  if (b.garble) return {{"id", id + "-wrong"}, {"scores", json::object()}};
  if (b.fail_ids.count(id)) return {{"id", id}, {"error", "rejected by stub"}};
  const std::string text = req.value("text", "");
  json scores = json::object();
  for (const auto& l : b.descriptor.vocabulary) {
    scores[l] = b.fixed_score ? *b.fixed_score : pttag::stub_score(l, text);
  }
  return {{"id", id}, {"scores", scores}};
}

json handshake(const Behaviour& b) {
  return {{"protocol_version", b.protocol_version}, {"descriptor", b.descriptor.to_json()}};
}

void serve_stream(const Behaviour& b) {
  std::cout << handshake(b).dump() << '\n' << std::flush;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << answer(b, line).dump() << '\n' << std::flush;
  }
}

bool write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::write(fd, s.data() + off, s.size() - off);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_connection(int fd, const Behaviour& b) {
  if (!write_all(fd, handshake(b).dump() + "\n")) return;
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    std::string out;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty()) out += answer(b, line).dump() + "\n";
    }
    if (!out.empty() && !write_all(fd, out)) return;
  }
}

int serve_tcp(int port, const Behaviour& b, int max_connections) {
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  if (srv < 0) return 3;
  int one = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(srv, 8) < 0) {
    std::perror("stub_sidecar");
    return 3;
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  // The chosen port goes to stdout so callers can use --listen 0.
  std::cout << "listening " << ntohs(addr.sin_port) << '\n' << std::flush;
  for (int served = 0; max_connections <= 0 || served < max_connections; ++served) {
    const int fd = ::accept(srv, nullptr, nullptr);
    if (fd < 0) break;
    serve_connection(fd, b);
    ::close(fd);
  }
  ::close(srv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stub scoring sidecar"};
  std::vector<std::string> labels;
  std::string vocab_path, kind = "monolithic", name = "stub-sidecar";
  std::optional<double> fixed;
  Behaviour b;
  std::vector<std::string> fail_ids;
  int port = -1, max_connections = 0;

  app.add_option("--labels", labels, "labels to score")->delimiter(',');
  app.add_option("--vocab", vocab_path, "score every label of this vocabulary");
  app.add_option("--kind", kind, "monolithic or binary")->check(CLI::IsMember({"monolithic", "binary"}));
  app.add_option("--name", name);
  app.add_option("--score", fixed, "answer this score for every label");
  app.add_option("--fail-id", fail_ids, "reject requests with this id");
  app.add_option("--protocol-version", b.protocol_version);
  app.add_flag("--garble", b.garble, "answer with mismatched ids");
  app.add_option("--listen", port, "serve TCP on this loopback port (0 picks one)");
  app.add_option("--max-connections", max_connections, "exit after this many TCP clients");
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGPIPE, SIG_IGN);
  try {
    if (!vocab_path.empty()) {
      for (const auto& l : pttag::load_vocabulary_file(vocab_path).labels()) labels.push_back(l);
    }
    if (labels.empty()) {
      std::cerr << "stub_sidecar: no labels (use --labels or --vocab)\n";
      return 1;
    }
    b.descriptor.name = name;
    b.descriptor.kind = kind == "binary" ? pttag::ScorerKind::kBinary : pttag::ScorerKind::kMonolithic;
    b.descriptor.vocabulary = labels;
    b.descriptor.validate();
    b.fixed_score = fixed;
    b.fail_ids.insert(fail_ids.begin(), fail_ids.end());
  } catch (const std::exception& e) {
    std::cerr << "stub_sidecar: " << e.what() << '\n';
    return 1;
  }
  if (port >= 0) return serve_tcp(port, b, max_connections);
  serve_stream(b);
  return 0;
}
