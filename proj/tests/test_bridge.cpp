#include <gtest/gtest.h>

#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "noisecoder/bridge/frame.hpp"
#include "noisecoder/bridge/session.hpp"
#include "noisecoder/sampler.hpp"
#include "noisecoder/score_models/bridge_model.hpp"
#include "noisecoder/score_models/gmm.hpp"
#include "noisecoder/stego.hpp"

extern char** environ;

using namespace noisecoder;
using namespace noisecoder::bridge;

namespace {

const std::vector<uint32_t> kShape = {3, 16, 16};
const std::chrono::milliseconds kTimeout{10'000};

std::string server(const std::string& args) { return std::string("cmd:") + BRIDGE_SERVER + " " + args; }
std::string gmm_server(const std::string& extra = "") {
  return server(std::string("--backend gmm:") + NOISECODER_FIXTURE + " " + extra);
}

std::vector<float> random_floats(size_t n, uint64_t seed, double scale = 1.0) {
  Rng r(seed, Stream::noise);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(scale * r.normal());
  return v;
}

Errc handshake_error(const std::string& endpoint, std::vector<uint32_t> shape, std::string* what = nullptr) {
  try {
    Session::handshake(endpoint, std::move(shape), kTimeout);
  } catch (const BridgeError& e) {
    if (what) *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "handshake succeeded";
  return Errc::transport;
}

// bridge_server listening on an ephemeral TCP port.
struct TcpServer {
  pid_t pid = -1;
  int port = 0;

  explicit TcpServer(const std::string& args) {
    int out[2];
    if (pipe(out) != 0) throw std::runtime_error("pipe");
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, out[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&fa, out[0]);
    const std::string cmd = std::string("exec ") + BRIDGE_SERVER + " --listen 0 " + args;
    const char* argv[] = {"/bin/sh", "-c", cmd.c_str(), nullptr};
    posix_spawn(&pid, "/bin/sh", &fa, nullptr, const_cast<char**>(argv), environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(out[1]);
    std::string line;
    char c;
    while (::read(out[0], &c, 1) == 1 && c != '\n') line += c;
    ::close(out[0]);
    if (line.rfind("port=", 0) != 0) throw std::runtime_error("server did not report a port: " + line);
    port = std::stoi(line.substr(5));
  }
  ~TcpServer() {
    if (pid > 0) {
      kill(pid, SIGTERM);
      waitpid(pid, nullptr, 0);
    }
  }
  std::string endpoint() const { return "tcp:127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST(Frame, RoundTripProperty) {
  Rng r(31, Stream::fixture);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<uint32_t> shape(1 + (r.next_u32() % 4));
    size_t n = 1;
    for (auto& d : shape) {
      d = 1 + static_cast<uint32_t>((r.next_u32() % 5));
      n *= d;
    }
    Frame f;
    switch ((r.next_u32() % 4)) {
      case 0: f = Frame::hello(shape); break;
      case 1: f = Frame::bye(); break;
      case 2: f = Frame::error("oops \"quoted\" \n line " + std::to_string(trial)); break;
      default: {
        std::optional<std::string> ctx;
        if (r.bit()) ctx = "prompt: a cat \xc3\xa9 | guidance=7.5 #" + std::to_string(trial);
        const double sigma = r.uniform() * std::pow(10.0, static_cast<double>((r.next_u32() % 9)) - 4);
        f = Frame::denoise(sigma, shape, random_floats(n, trial), ctx);
      }
    }
    ASSERT_EQ(decode_frame(encode_frame(f)), f) << encode_header(f);
  }
}

TEST(Frame, HeaderFields) {
  const Frame f = Frame::denoise(80.0, {1, 1, 2}, {1.0f, 2.0f});
  const std::string h = encode_header(f);
  EXPECT_NE(h.find("80"), std::string::npos);
  EXPECT_EQ(h.back(), '\n');
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 1);
  EXPECT_NE(h.find("\"payload_len\":8"), std::string::npos) << h;
  const Header parsed = decode_header(h.substr(0, h.size() - 1));
  EXPECT_EQ(parsed.frame.sigma, 80.0);

  const double odd = 0.1 + 0.2;
  EXPECT_EQ(decode_frame(encode_frame(Frame::denoise(odd, {1}, {0.f}))).sigma, odd);
}

TEST(Frame, LatentPayloadSize) {
  const Frame f = Frame::denoise(1.0, {4, 64, 64}, std::vector<float>(4 * 64 * 64));
  const std::string h = encode_header(f);
  EXPECT_NE(h.find("\"payload_len\":65536"), std::string::npos);
  EXPECT_EQ(encode_frame(f).size(), h.size() + 65536);
}

TEST(Frame, LittleEndianPayload) {
  const auto bytes = encode_frame(Frame::denoise(1.0, {1}, {1.0f}));
  const std::vector<uint8_t> tail(bytes.end() - 4, bytes.end());
  EXPECT_EQ(tail, (std::vector<uint8_t>{0x00, 0x00, 0x80, 0x3F}));
}

TEST(Frame, DecodeErrors) {
  auto code = [](std::string_view line) {
    try {
      decode_header(line);
    } catch (const BridgeError& e) {
      return e.code();
    }
    return Errc::transport;
  };
  EXPECT_EQ(code("not json"), Errc::malformed_frame);
  EXPECT_EQ(code("{}"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"fly"})"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"hello","shape":[3]})"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"denoise","sigma":1,"shape":[2],"payload_len":4})"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"denoise","sigma":-1,"shape":[1],"payload_len":4})"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"denoise","sigma":1,"shape":[0],"payload_len":0})"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"denoise","sigma":1,"shape":[1],"payload_len":4,"context":5})"), Errc::malformed_frame);
  EXPECT_EQ(code(R"({"op":"bye","payload_len":4})"), Errc::malformed_frame);
  EXPECT_EQ(decode_header(R"({"op":"denoise","sigma":1,"shape":[1],"payload_len":4})").payload_len, 4u);

  const auto bytes = encode_frame(Frame::denoise(1.0, {2}, {1.f, 2.f}));
  EXPECT_THROW(decode_frame(std::span(bytes).first(bytes.size() - 1)), BridgeError);
  const std::string no_newline = R"({"op":"bye"})";
  EXPECT_THROW(decode_frame(std::vector<uint8_t>(no_newline.begin(), no_newline.end())), BridgeError);
}

TEST(Session, IdentityEchoBitExact) {
  Session s = Session::handshake(server("--shape 3x16x16"), kShape, kTimeout);
  auto x = random_floats(768, 1, 50.0);
  x[0] = -0.0f;
  x[1] = 1e-38f;
  x[2] = 3.4e38f;
  const auto y = s.request_denoise(x, 80.0, "ctx");
  ASSERT_EQ(y.size(), x.size());
  EXPECT_EQ(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)), 0);
  EXPECT_EQ(s.requests(), 1u);
  s.close();
  EXPECT_FALSE(s.usable());
}

TEST(Session, GmmMirror) {
  auto gmm = GaussianMixtureModel::load(NOISECODER_FIXTURE);
  Session s = Session::handshake(gmm_server(), kShape, kTimeout);
  Rng r(2, Stream::fixture);
  double worst = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const double sigma = std::exp(std::log(0.002) + r.uniform() * (std::log(80.0) - std::log(0.002)));
    const auto x = random_floats(768, 100 + probe, sigma + 0.5);
    const auto y = s.request_denoise(x, sigma);
    const auto d = gmm.denoise(LatentTensor(gmm.shape(), std::vector<double>(x.begin(), x.end())), sigma);
    for (size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - d[i]));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Session, FifoReplies) {
  auto gmm = GaussianMixtureModel::load(NOISECODER_FIXTURE);
  Session s = Session::handshake(gmm_server(), kShape, kTimeout);
  for (int k = 0; k < 20; ++k) {
    const double sigma = 0.01 * (k + 1) * (k + 1);
    const auto x = random_floats(768, 500 + k);
    const auto y = s.request_denoise(x, sigma);
    const auto d = gmm.denoise(LatentTensor(gmm.shape(), std::vector<double>(x.begin(), x.end())), sigma);
    for (size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], d[i], 1e-5) << k;
  }
}

TEST(Session, HandshakeRejections) {
  std::string what;
  EXPECT_EQ(handshake_error(server("--shape 3x16x16 --version-string 2"), kShape, &what), Errc::unsupported_protocol);
  EXPECT_NE(what.find("unsupported protocol"), std::string::npos) << what;

  EXPECT_EQ(handshake_error(server("--shape 4x64x64"), {3, 64, 64}, &what), Errc::shape_mismatch);
  EXPECT_NE(what.find("shape mismatch"), std::string::npos) << what;

  EXPECT_EQ(handshake_error(server("--shape 3x16x16 --advertise-shape 3x16x17"), kShape), Errc::shape_mismatch);
  EXPECT_EQ(handshake_error("cmd:exit 0", kShape), Errc::connection_lost);
  EXPECT_EQ(handshake_error("tcp:127.0.0.1:1", kShape), Errc::transport);
  EXPECT_EQ(handshake_error("ftp:x", kShape), Errc::transport);
}

TEST(Session, ConnectionLostMidRequest) {
  Session s = Session::handshake(server("--shape 3x16x16 --close-on 2"), kShape, kTimeout);
  const auto x = random_floats(768, 3);
  EXPECT_NO_THROW(s.request_denoise(x, 1.0));
  try {
    s.request_denoise(x, 1.0);
    FAIL();
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.code(), Errc::connection_lost);
    EXPECT_STREQ(e.what(), "bridge: connection lost");
  }
  EXPECT_FALSE(s.usable());
  EXPECT_THROW(s.request_denoise(x, 1.0), BridgeError);
}

TEST(Session, NonFiniteReply) {
  Session s = Session::handshake(server("--shape 3x16x16 --nan"), kShape, kTimeout);
  try {
    s.request_denoise(random_floats(768, 4), 1.0);
    FAIL();
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.code(), Errc::non_finite);
  }
}

TEST(Session, Timeout) {
  Session s = Session::handshake(server("--shape 3x16x16 --delay-ms 2000"), kShape, std::chrono::milliseconds(200));
  const auto t0 = Clock::now();
  try {
    s.request_denoise(random_floats(768, 5), 1.0);
    FAIL();
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.code(), Errc::timeout);
  }
  EXPECT_LT(Clock::now() - t0, std::chrono::milliseconds(1500));
}

TEST(Session, WrongRequestSize) {
  Session s = Session::handshake(server("--shape 3x16x16"), kShape, kTimeout);
  EXPECT_THROW(s.request_denoise(std::vector<float>(10), 1.0), std::invalid_argument);
  EXPECT_TRUE(s.usable());
}

TEST(Session, ServerErrorFrameAndMalformedReply) {
  // in-process fake server on a socketpair
  int sv[2];
  ASSERT_EQ(socketpair(AF_UNIX, SOCK_STREAM, 0, sv), 0);
  std::thread peer([fd = sv[1]] {
    Connection c(fd, fd);
    const auto deadline = Clock::now() + std::chrono::seconds(10);
    c.read_line(kMaxHeaderBytes, deadline);
    c.write_all(encode_frame(Frame::hello(kShape)), deadline);
    auto h = decode_header(c.read_line(kMaxHeaderBytes, deadline));
    std::vector<uint8_t> payload(h.payload_len);
    c.read_exact(payload, deadline);
    c.write_all(encode_frame(Frame::error("model exploded")), deadline);
    h = decode_header(c.read_line(kMaxHeaderBytes, deadline));
    c.read_exact(payload, deadline);
    const std::string junk = "this is not json\n";
    c.write_all(std::span(reinterpret_cast<const uint8_t*>(junk.data()), junk.size()), deadline);
  });
  Session s = Session::handshake(std::make_unique<Connection>(sv[0], sv[0]), kShape, kTimeout);
  const auto x = random_floats(768, 6);
  try {
    s.request_denoise(x, 1.0);
    FAIL();
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.code(), Errc::server_error);
    EXPECT_STREQ(e.what(), "bridge: server error: model exploded");
  }
  EXPECT_TRUE(s.usable());
  try {
    s.request_denoise(x, 1.0);
    FAIL();
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.code(), Errc::malformed_frame);
  }
  EXPECT_FALSE(s.usable());
  peer.join();
}

TEST(Session, TcpEndpoint) {
  TcpServer srv("--shape 3x16x16");
  Session a = Session::handshake(srv.endpoint(), kShape, kTimeout);
  Session b = Session::handshake(srv.endpoint(), kShape, kTimeout);
  const auto x = random_floats(768, 7);
  EXPECT_EQ(a.request_denoise(x, 2.0), x);
  EXPECT_EQ(b.request_denoise(x, 3.0), x);
}

TEST(BridgeModel, HideExtractRequestCountAndAgreement) {
  auto gmm = GaussianMixtureModel::load(NOISECODER_FIXTURE);
  BridgeModel remote(gmm_server(), gmm.shape(), 1, kTimeout);
  remote.connect();
  const auto sched = SigmaSchedule::build({});
  Rng r(8, Stream::payload);
  Bits payload(256);
  for (auto& b : payload) b = r.bit();
  const StegoKey key{ProjectionSpec::mb(), 3, std::nullopt};
  const Message m = make_message(payload, key.projection, gmm.shape(), 1, key.seed);

  const auto x_remote = hide(m, key, sched, remote, "prompt");
  const auto out = extract(x_remote, key, 1, sched, remote, "prompt");
  EXPECT_EQ(remote.requests(), 2u * (2 * 40 - 1));

  const auto x_local = hide(m, key, sched, gmm);
  EXPECT_LE(max_abs_diff(x_remote, x_local), 1e-4);
  EXPECT_EQ(out.bits, extract(x_local, key, 1, sched, gmm).bits);
}

TEST(BridgeModel, PoolServesThreads) {
  BridgeModel remote(server("--shape 3x16x16 --delay-ms 20"), Shape{3, 16, 16}, 3, kTimeout);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      const auto f = random_floats(768, 900 + t);
      const LatentTensor x(Shape{3, 16, 16}, std::vector<double>(f.begin(), f.end()));
      for (int k = 0; k < 5; ++k) ok += remote.denoise(x, 1.0, "") == x;
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(ok.load(), 30);
  EXPECT_EQ(remote.requests(), 30u);
}

TEST(BridgeModel, UnreachableAndShape) {
  BridgeModel missing("cmd:/nonexistent/server", Shape{3, 16, 16}, 1, kTimeout);
  EXPECT_THROW(missing.connect(), BridgeError);
  BridgeModel remote(server("--shape 3x16x16"), Shape{3, 16, 16}, 1, kTimeout);
  EXPECT_THROW(remote.denoise(LatentTensor(Shape{3, 16, 8}), 1.0, ""), std::invalid_argument);
}

TEST(BridgeModel, EnvironmentOverride) {
  unsetenv("NOISECODER_BRIDGE");
  EXPECT_EQ(resolve_bridge_endpoint("cmd:a"), "cmd:a");
  setenv("NOISECODER_BRIDGE", "", 1);
  EXPECT_EQ(resolve_bridge_endpoint("cmd:a"), "cmd:a");
  setenv("NOISECODER_BRIDGE", "tcp:h:1", 1);
  EXPECT_EQ(resolve_bridge_endpoint("cmd:a"), "tcp:h:1");
  unsetenv("NOISECODER_BRIDGE");
}
