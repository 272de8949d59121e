#include "noisecoder/score_models/bridge_model.hpp"

#include <cstdlib>
#include <stdexcept>

namespace noisecoder {

BridgeModel::BridgeModel(std::string endpoint, Shape shape, size_t pool_size, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), shape_(shape), pool_size_(pool_size), timeout_(timeout) {
  if (!shape_.valid()) throw std::invalid_argument("bridge model needs a valid shape");
  if (pool_size_ == 0) throw std::invalid_argument("bridge pool size must be at least 1");
}

BridgeModel::~BridgeModel() {
  std::lock_guard lock(mutex_);
  idle_.clear();
}

void BridgeModel::connect() { release(acquire()); }

uint64_t BridgeModel::requests() const { return requests_.load(); }

std::unique_ptr<bridge::Session> BridgeModel::acquire() {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [&] { return !idle_.empty() || open_ < pool_size_; });
  if (!idle_.empty()) {
    auto s = std::move(idle_.back());
    idle_.pop_back();
    return s;
  }
  ++open_;
  lock.unlock();
  try {
    return std::make_unique<bridge::Session>(bridge::Session::handshake(
        endpoint_, {shape_.channels, shape_.height, shape_.width}, timeout_));
  } catch (...) {
    lock.lock();
    --open_;
    idle_cv_.notify_one();
    throw;
  }
}

void BridgeModel::release(std::unique_ptr<bridge::Session> session) {
  std::lock_guard lock(mutex_);
  if (session->usable()) {
    idle_.push_back(std::move(session));
  } else {
    --open_;
  }
  idle_cv_.notify_one();
}

LatentTensor BridgeModel::denoise(const LatentTensor& x, double sigma, std::string_view context) {
  if (x.shape() != shape_) throw std::invalid_argument("tensor shape does not match bridge model");
  std::vector<float> wire(x.size());
  for (size_t i = 0; i < x.size(); ++i) wire[i] = static_cast<float>(x[i]);
  std::optional<std::string> ctx;
  if (!context.empty()) ctx = std::string(context);

  auto session = acquire();
  std::vector<float> reply;
  ++requests_;
  try {
    reply = session->request_denoise(wire, sigma, std::move(ctx));
  } catch (...) {
    release(std::move(session));
    throw;
  }
  release(std::move(session));

  std::vector<double> out(reply.begin(), reply.end());
  return LatentTensor(shape_, std::move(out));
}

std::string resolve_bridge_endpoint(const std::string& configured) {
  const char* env = std::getenv("NOISECODER_BRIDGE");
  if (env != nullptr && *env != '\0') return env;
  return configured;
}

}  // namespace noisecoder
