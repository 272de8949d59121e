#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noisecoder/core/tensor.hpp"

// Checks that a carrier noise tensor still looks like i.i.d. N(0, 1) before
// it is handed to the sampler. A carrier that drifts in mean, variance or
// correlation makes the sampler produce off-distribution images.
namespace noisecoder::diagnostics {

enum class Verdict { pass, warn, fail };
const char* verdict_name(Verdict v);

struct Gates {
  double warn = 3.0;
  double fail = 5.0;
};

struct CollapseReport {
  size_t n = 0;
  double mean_z = 0.0;    // mean * sqrt(n)
  double var_stat = 0.0;  // (var - 1) * sqrt(n / 2)
  // Pearson r; each is compared against gate / sqrt(pairs it was computed from).
  double max_abs_corr_channel = 0.0;  // worst channel pair, 0 for one channel
  double corr_h = 0.0;                // lag-1 horizontal, pooled over channels
  double corr_v = 0.0;                // lag-1 vertical
  double max_abs_corr = 0.0;
  double corr_z = 0.0;                // worst |r| * sqrt(pairs)

  Verdict mean_verdict = Verdict::pass;
  Verdict var_verdict = Verdict::pass;
  Verdict independence_verdict = Verdict::pass;

  Verdict overall() const;
};

/// Needs at least 100 elements.
CollapseReport check_collapse(const LatentTensor& z, Gates gates = {});

/// `key=value` lines.
std::string format_report(const CollapseReport& report);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<uint64_t> counts;
  double mean = 0.0;
  double stddev = 0.0;
  double max_abs = 0.0;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double bin_center(size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }
};

/// Histogram of z - z_prime over equal-width bins spanning [min, max] of the
/// differences. If every difference is equal, the range is widened by 0.5 on
/// each side so the spike lands in a single bin.
Histogram error_histogram(const LatentTensor& z, const LatentTensor& z_prime, uint32_t bins);

/// Two columns per line: bin center, count.
std::string format_histogram(const Histogram& h);

}  // namespace noisecoder::diagnostics
