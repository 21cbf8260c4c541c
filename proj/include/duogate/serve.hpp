#pragma once

#include <atomic>
#include <functional>
#include <string>

#include "duogate/engine.hpp"

namespace duogate {

// Line protocol over loopback TCP. Request: "<id>\t<text>\n". Response:
// "<id>\t<decision>\t<stage>\t<similarity>\n" with similarity formatted
// %.6f, or "-" when the verdict carries none. Responses are written in
// request order. A malformed line gets "ERR\t<message>\n". Arrival indices
// are assigned by the server in receipt order.
struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 = ephemeral
};

// Blocks until `stop` becomes true; `on_listening` fires once with the bound
// port. Connections are handled one at a time. Returns 0 on clean shutdown.
int run_serve(Engine& engine, const ServeOptions& opts, std::atomic<bool>& stop,
              const std::function<void(int)>& on_listening = nullptr);

// One protocol round on an already-adjudicated verdict (exposed for tests).
std::string serve_response_line(const std::string& id, const Verdict& v);

}  // namespace duogate
