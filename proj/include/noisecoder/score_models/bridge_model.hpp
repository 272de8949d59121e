#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "noisecoder/bridge/session.hpp"
#include "noisecoder/score_model.hpp"

namespace noisecoder {

/// Denoiser served by an external process over the score bridge. Holds up to
/// `pool_size` sessions, opened on demand; each carries one request at a time.
class BridgeModel final : public ScoreModel {
 public:
  BridgeModel(std::string endpoint, Shape shape, size_t pool_size = 1,
              std::chrono::milliseconds timeout = bridge::kDefaultTimeout);
  ~BridgeModel() override;

  Shape shape() const override { return shape_; }
  LatentTensor denoise(const LatentTensor& x, double sigma, std::string_view context) override;
  bool concurrent_safe() const override { return true; }

  /// Opens one session now so an unreachable endpoint fails early.
  void connect();
  uint64_t requests() const;
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::unique_ptr<bridge::Session> acquire();
  void release(std::unique_ptr<bridge::Session> session);

  std::string endpoint_;
  Shape shape_;
  size_t pool_size_;
  std::chrono::milliseconds timeout_;

  mutable std::mutex mutex_;
  std::condition_variable idle_cv_;
  std::vector<std::unique_ptr<bridge::Session>> idle_;
  size_t open_ = 0;
  std::atomic<uint64_t> requests_{0};
};

/// NOISECODER_BRIDGE, when set and non-empty, replaces the configured endpoint.
std::string resolve_bridge_endpoint(const std::string& configured);

}  // namespace noisecoder
