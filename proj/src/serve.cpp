#include "duogate/serve.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace duogate {

std::string serve_response_line(const std::string& id, const Verdict& v) {
  char simbuf[32];
  if (v.similarity) std::snprintf(simbuf, sizeof(simbuf), "%.6f", *v.similarity);
  else std::snprintf(simbuf, sizeof(simbuf), "-");
  return id + "\t" + decision_name(v.decision) + "\t" + stage_name(v.stage) + "\t" + simbuf + "\n";
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void handle_connection(int fd, Engine& engine, std::atomic<bool>& stop) {
  std::string buf;
  char chunk[4096];
  while (!stop.load()) {
    struct pollfd pfd {fd, POLLIN, 0};
    int pr = ::poll(&pfd, 1, 100);
    if (pr < 0) break;
    if (pr == 0) continue;
    ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (;;) {
      std::size_t nl = buf.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = buf.substr(start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::size_t tab = line.find('\t');
      std::string resp;
      if (tab == std::string::npos || tab + 1 >= line.size()) {
        resp = "ERR\texpected <id>\\t<text>\n";
      } else {
        Request r;
        r.id = engine.last_arrival() + 1;
        r.arrival_index = engine.last_arrival() + 1;
        r.text = line.substr(tab + 1);
        try {
          Verdict v = engine.adjudicate(r);
          resp = serve_response_line(line.substr(0, tab), v);
        } catch (const std::exception& e) {
          resp = std::string("ERR\t") + e.what() + "\n";
        }
      }
      if (!send_all(fd, resp)) {  // connection gone
        ::close(fd);
        return;
      }
    }
    buf.erase(0, start);
  }
  ::close(fd);
}

}  // namespace

int run_serve(Engine& engine, const ServeOptions& opts, std::atomic<bool>& stop,
              const std::function<void(int)>& on_listening) {
  int listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(opts.port));
  if (::inet_pton(AF_INET, opts.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd);
    throw std::runtime_error("bad listen address: " + opts.host);
  }
  if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd);
    throw std::runtime_error("bind() failed");
  }
  if (::listen(listen_fd, 8) != 0) {
    ::close(listen_fd);
    throw std::runtime_error("listen() failed");
  }
  socklen_t alen = sizeof(addr);
  ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &alen);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  while (!stop.load()) {
    struct pollfd pfd {listen_fd, POLLIN, 0};
    int pr = ::poll(&pfd, 1, 100);
    if (pr < 0) break;
    if (pr == 0) continue;
    int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) continue;
    handle_connection(fd, engine, stop);
  }
  ::close(listen_fd);
  return 0;
}

}  // namespace duogate
