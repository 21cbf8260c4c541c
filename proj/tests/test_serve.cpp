#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <future>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "duogate/engine.hpp"
#include "duogate/serve.hpp"

using namespace duogate;

namespace {

Engine make_engine() {
  EngineConfig cfg;
  cfg.thresholds.tau_sem = 0.95;
  cfg.thresholds.tau_int = 0.80;
  cfg.thresholds.k = 1;
  return Engine(make_frozen_encoder(3, 16, 64), make_intent_head(4, 64, 16, 8), StoreConfig{},
                StoreConfig{}, cfg);
}

struct Client {
  int fd = -1;
  std::string pending;

  explicit Client(int port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    REQUIRE(::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr) == 1);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  }
  ~Client() {
    if (fd >= 0) ::close(fd);
  }

  void send_raw(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd, data.data() + off, data.size() - off, 0);
      REQUIRE(n > 0);
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    for (;;) {
      std::size_t nl = pending.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending.substr(0, nl);
        pending.erase(0, nl + 1);
        return line;
      }
      char buf[1024];
      ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
      REQUIRE(n > 0);
      pending.append(buf, static_cast<std::size_t>(n));
    }
  }
};

struct Server {
  Engine engine = make_engine();
  std::atomic<bool> stop{false};
  std::promise<int> port_promise;
  std::future<int> rc;
  int port = 0;

  Server() {
    auto fut = port_promise.get_future();
    rc = std::async(std::launch::async, [this] {
      ServeOptions opts;  // ephemeral port on loopback
      return run_serve(engine, opts, stop,
                       [this](int p) { port_promise.set_value(p); });
    });
    REQUIRE(fut.wait_for(std::chrono::seconds(5)) == std::future_status::ready);
    port = fut.get();
    REQUIRE(port > 0);
  }
  ~Server() {
    stop = true;
    if (rc.valid()) rc.wait();
  }
};

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("response line formatting") {
  Verdict v;
  v.decision = Decision::Allow;
  v.stage = Stage::EmptyHistory;
  CHECK(serve_response_line("7", v) == "7\tallow\tempty_history\t-\n");
  v.decision = Decision::Block;
  v.stage = Stage::IntentBlocked;
  v.similarity = 0.8125;
  CHECK(serve_response_line("abc", v) == "abc\tblock\tintent_blocked\t0.812500\n");
}

TEST_CASE("line protocol over loopback") {
  Server server;
  Client client(server.port);

  client.send_raw("1\thello alpha world\n");
  auto f1 = fields(client.read_line());
  REQUIRE(f1.size() == 4);
  CHECK(f1[0] == "1");
  CHECK(f1[1] == "allow");
  CHECK(f1[2] == "empty_history");
  CHECK(f1[3] == "-");

  // identical text inherits with near-unity similarity
  client.send_raw("2\thello alpha world\n");
  auto f2 = fields(client.read_line());
  REQUIRE(f2.size() == 4);
  CHECK(f2[0] == "2");
  CHECK(f2[1] == "allow");
  CHECK(f2[2] == "inherited");
  CHECK(std::stod(f2[3]) > 0.999);

  // a request split across packets is reassembled
  client.send_raw("3\tsplit req");
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  client.send_raw("uest text\n");
  auto f3 = fields(client.read_line());
  CHECK(f3[0] == "3");
  CHECK(f3[1] == "allow");

  // two requests in one packet produce two ordered responses
  client.send_raw("4\tbatch one\n5\tbatch two\n");
  CHECK(fields(client.read_line())[0] == "4");
  CHECK(fields(client.read_line())[0] == "5");

  // malformed line and whitespace-only text produce ERR, connection survives
  client.send_raw("no tab separator\n");
  auto e1 = fields(client.read_line());
  CHECK(e1[0] == "ERR");
  client.send_raw("6\t   \n");
  auto e2 = fields(client.read_line());
  CHECK(e2[0] == "ERR");
  CHECK(e2[1] == "empty input");
  client.send_raw("7\tstill alive\n");
  CHECK(fields(client.read_line())[0] == "7");

  // verdicts were recorded for the six adjudicated requests
  CHECK(server.engine.verdict_log().size() == 6);
}

TEST_CASE("connections are served one after another") {
  Server server;
  {
    Client a(server.port);
    a.send_raw("1\tfirst connection\n");
    CHECK(fields(a.read_line())[0] == "1");
  }
  {
    Client b(server.port);
    b.send_raw("2\tsecond connection\n");
    auto f = fields(b.read_line());
    CHECK(f[0] == "2");
  }
  CHECK(server.engine.verdict_log().size() == 2);
}

TEST_CASE("stop flag shuts the server down cleanly") {
  auto t0 = std::chrono::steady_clock::now();
  int rc;
  {
    Server server;
    Client c(server.port);
    c.send_raw("1\tping\n");
    c.read_line();
    server.stop = true;
    REQUIRE(server.rc.wait_for(std::chrono::seconds(5)) == std::future_status::ready);
    rc = server.rc.get();
  }
  CHECK(rc == 0);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 5.0);
}
