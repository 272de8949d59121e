#include "noisecoder/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace noisecoder::diagnostics {

namespace {

// Accumulates Pearson r over (a, b) pairs.
struct PairStats {
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;

  void add(double a, double b) {
    n += 1;
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  double r() const {
    const double cov = sab - sa * sb / n;
    const double va = saa - sa * sa / n;
    const double vb = sbb - sb * sb / n;
    if (va <= 0 || vb <= 0) return 0.0;
    return cov / std::sqrt(va * vb);
  }
};

Verdict grade(double stat, const Gates& g) {
  const double a = std::abs(stat);
  if (!(a <= g.fail)) return Verdict::fail;  // NaN fails too
  if (a > g.warn) return Verdict::warn;
  return Verdict::pass;
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::warn: return "warn";
    case Verdict::fail: return "fail";
  }
  return "?";
}

Verdict CollapseReport::overall() const { return std::max({mean_verdict, var_verdict, independence_verdict}); }

CollapseReport check_collapse(const LatentTensor& z, Gates gates) {
  if (z.size() < 100) throw std::invalid_argument("tensor too small for collapse check (need >= 100 elements)");
  const Shape s = z.shape();
  CollapseReport rep;
  rep.n = z.size();
  const double n = static_cast<double>(rep.n);

  double sum = 0;
  for (double v : z.data()) sum += v;
  const double mean = sum / n;
  double ss = 0;
  for (double v : z.data()) ss += (v - mean) * (v - mean);
  const double var = ss / n;
  rep.mean_z = mean * std::sqrt(n);
  rep.var_stat = (var - 1.0) * std::sqrt(n / 2.0);

  double worst_z = 0.0;
  auto track = [&](const PairStats& p) {
    const double r = p.r();
    worst_z = std::max(worst_z, std::abs(r) * std::sqrt(p.n));
    rep.max_abs_corr = std::max(rep.max_abs_corr, std::abs(r));
    return r;
  };

  for (uint32_t a = 0; a < s.channels; ++a)
    for (uint32_t b = a + 1; b < s.channels; ++b) {
      PairStats p;
      const auto ca = z.channel(a), cb = z.channel(b);
      for (size_t i = 0; i < ca.size(); ++i) p.add(ca[i], cb[i]);
      rep.max_abs_corr_channel = std::max(rep.max_abs_corr_channel, std::abs(track(p)));
    }

  PairStats h, v;
  for (uint32_t c = 0; c < s.channels; ++c)
    for (uint32_t y = 0; y < s.height; ++y)
      for (uint32_t x = 0; x < s.width; ++x) {
        if (x + 1 < s.width) h.add(z.at(c, y, x), z.at(c, y, x + 1));
        if (y + 1 < s.height) v.add(z.at(c, y, x), z.at(c, y + 1, x));
      }
  if (h.n >= 2) rep.corr_h = track(h);
  if (v.n >= 2) rep.corr_v = track(v);
  rep.corr_z = worst_z;

  rep.mean_verdict = grade(rep.mean_z, gates);
  rep.var_verdict = grade(rep.var_stat, gates);
  rep.independence_verdict = grade(rep.corr_z, gates);
  return rep;
}

std::string format_report(const CollapseReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "n=%zu\nmean_z=%.6f\nvar_stat=%.6f\nmax_abs_corr=%.6f\ncorr_h=%.6f\ncorr_v=%.6f\n"
                "corr_channel=%.6f\nmean_verdict=%s\nvar_verdict=%s\nindependence_verdict=%s\n"
                "collapse_verdict=%s\n",
                r.n, r.mean_z, r.var_stat, r.max_abs_corr, r.corr_h, r.corr_v, r.max_abs_corr_channel,
                verdict_name(r.mean_verdict), verdict_name(r.var_verdict), verdict_name(r.independence_verdict),
                verdict_name(r.overall()));
  return buf;
}

Histogram error_histogram(const LatentTensor& z, const LatentTensor& z_prime, uint32_t bins) {
  if (z.shape() != z_prime.shape()) throw std::invalid_argument("shape mismatch");
  if (bins == 0) throw std::invalid_argument("need at least one bin");
  if (z.empty()) throw std::invalid_argument("empty tensors");
  std::vector<double> d(z.size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = z[i] - z_prime[i];

  Histogram h;
  const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
  h.lo = *mn;
  h.hi = *mx;
  if (!(h.hi > h.lo)) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  h.counts.assign(bins, 0);
  const double width = h.bin_width();
  double sum = 0;
  for (double v : d) {
    auto k = static_cast<size_t>((v - h.lo) / width);
    h.counts[std::min<size_t>(k, bins - 1)]++;
    sum += v;
    h.max_abs = std::max(h.max_abs, std::abs(v));
  }
  h.mean = sum / static_cast<double>(d.size());
  double ss = 0;
  for (double v : d) ss += (v - h.mean) * (v - h.mean);
  h.stddev = std::sqrt(ss / static_cast<double>(d.size()));
  return h;
}

std::string format_histogram(const Histogram& h) {
  std::string out;
  char buf[96];
  for (size_t i = 0; i < h.counts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %llu\n", h.bin_center(i), static_cast<unsigned long long>(h.counts[i]));
    out += buf;
  }
  return out;
}

}  // namespace noisecoder::diagnostics
