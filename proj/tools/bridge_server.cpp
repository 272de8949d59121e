// Reference score-bridge server: identity and Gaussian-mixture backends over
// stdio or TCP, plus a few switches that make it misbehave on purpose so the
// client's failure handling can be exercised.
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <thread>

#include "json.hpp"
#include "noisecoder/bridge/frame.hpp"
#include "noisecoder/bridge/transport.hpp"
#include "noisecoder/cli/config.hpp"
#include "noisecoder/score_models/gmm.hpp"

using namespace noisecoder;
using namespace noisecoder::bridge;

namespace {

struct Options {
  std::string backend = "identity";
  std::string shape;
  int listen_port = -1;
  std::string version = std::string(kProtocolVersion);
  std::string advertise_shape;
  uint64_t close_on = 0;  // drop the connection when this denoise request arrives (1-based)
  bool nan = false;
  int delay_ms = 0;
};

struct Backend {
  Shape shape;
  std::shared_ptr<const GaussianMixtureModel> gmm;  // null: identity

  std::vector<float> denoise(const std::vector<float>& x, double sigma) const {
    if (!gmm) return x;
    LatentTensor t(shape, std::vector<double>(x.begin(), x.end()));
    const LatentTensor d = gmm->denoise(t, sigma);
    return {d.data().begin(), d.data().end()};
  }
};

std::vector<uint32_t> dims(Shape s) { return {s.channels, s.height, s.width}; }

void send(Connection& c, const Frame& f) {
  c.write_all(encode_frame(f), Clock::now() + std::chrono::seconds(60));
}

// One connection until bye or EOF.
void serve(Connection& conn, const Backend& backend, const Options& opt) {
  const auto forever = Clock::now() + std::chrono::hours(24 * 365);
  Shape advertised = backend.shape;
  if (!opt.advertise_shape.empty()) advertised = cli::parse_shape(opt.advertise_shape);
  uint64_t requests = 0;
  bool greeted = false;
  for (;;) {
    std::string line;
    try {
      line = conn.read_line(kMaxHeaderBytes, forever);
    } catch (const BridgeError&) {
      return;
    }
    Header h;
    try {
      h = decode_header(line);
    } catch (const BridgeError& e) {
      // Skip the payload the header promised, if it said anything usable.
      size_t skip = 0;
      try {
        const auto j = nlohmann::json::parse(line);
        if (j.contains("payload_len") && j["payload_len"].is_number_unsigned()) skip = j["payload_len"].get<size_t>();
      } catch (...) {
      }
      std::vector<uint8_t> junk(skip);
      try {
        conn.read_exact(junk, forever);
      } catch (const BridgeError&) {
        return;
      }
      const std::string what = e.what();
      const auto pos = what.find("frame: ");
      send(conn, Frame::error(pos == std::string::npos ? what : what.substr(pos + 7)));
      continue;
    }
    switch (h.frame.op) {
      case Op::hello: {
        Frame reply = Frame::hello(dims(advertised));
        reply.version = opt.version;
        send(conn, reply);
        greeted = true;
        break;
      }
      case Op::bye: return;
      case Op::error: break;
      case Op::denoise: {
        ++requests;
        if (opt.close_on != 0 && requests == opt.close_on) return;
        std::vector<uint8_t> payload(h.payload_len);
        conn.read_exact(payload, forever);
        Frame req = attach_payload(std::move(h), payload);
        if (!greeted) {
          send(conn, Frame::error("hello expected first"));
          break;
        }
        if (req.shape != dims(backend.shape)) {
          send(conn, Frame::error("shape mismatch"));
          break;
        }
        if (opt.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opt.delay_ms));
        std::vector<float> out = backend.denoise(req.payload, req.sigma);
        if (opt.nan && !out.empty()) out[0] = std::numeric_limits<float>::quiet_NaN();
        send(conn, Frame::denoise(req.sigma, req.shape, std::move(out)));
        break;
      }
    }
  }
}

int listen_tcp(int port, const Backend& backend, const Options& opt) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 16) != 0) {
    std::cerr << "error: cannot listen on port " << port << "\n";
    return 1;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  std::cout << "port=" << ntohs(addr.sin_port) << std::endl;
  for (;;) {
    const int client = ::accept4(fd, nullptr, nullptr, SOCK_CLOEXEC);
    if (client < 0) continue;
    std::thread([client, &backend, &opt] {
      Connection conn(client, ::dup(client));
      try {
        serve(conn, backend, opt);
      } catch (const std::exception& e) {
        std::cerr << "connection: " << e.what() << "\n";
      }
    }).detach();
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"score-bridge server (protocol version 1)", "bridge_server"};
  app.add_option("--backend", opt.backend, "identity or gmm:<fixture.nzt>");
  app.add_option("--shape", opt.shape, "CxHxW for the identity backend");
  app.add_option("--listen", opt.listen_port, "serve TCP on 127.0.0.1:<port> (0 picks one) instead of stdio");
  app.add_option("--version-string", opt.version, "protocol version to advertise");
  app.add_option("--advertise-shape", opt.advertise_shape, "shape to advertise instead of the real one");
  app.add_option("--close-on", opt.close_on, "hang up when the k-th denoise request arrives");
  app.add_flag("--nan", opt.nan, "poison replies with a NaN");
  app.add_option("--delay-ms", opt.delay_ms, "sleep before each reply");
  CLI11_PARSE(app, argc, argv);

  Backend backend;
  try {
    if (opt.backend.rfind("gmm:", 0) == 0) {
      backend.gmm = std::make_shared<GaussianMixtureModel>(GaussianMixtureModel::load(opt.backend.substr(4)));
      backend.shape = backend.gmm->shape();
    } else if (opt.backend == "identity") {
      backend.shape = cli::parse_shape(opt.shape.empty() ? "3x16x16" : opt.shape);
    } else {
      std::cerr << "error: unknown backend " << opt.backend << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (opt.listen_port >= 0) return listen_tcp(opt.listen_port, backend, opt);
  Connection conn(STDIN_FILENO, STDOUT_FILENO);
  try {
    serve(conn, backend, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
