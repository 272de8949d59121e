#include "noisecoder/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace noisecoder::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_int(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("bad integer for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  // from_chars for double is missing on older libstdc++
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw ConfigError("bad number for " + std::string(key) + ": '" + s + "'");
  }
  return out;
}

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Shape parse_shape(std::string_view text) {
  Shape s;
  uint32_t* dims[] = {&s.channels, &s.height, &s.width};
  size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto next = i < 2 ? text.find('x', pos) : text.size();
    if (next == std::string_view::npos) throw ConfigError("shape must look like CxHxW: '" + std::string(text) + "'");
    *dims[i] = parse_int<uint32_t>("shape", text.substr(pos, next - pos));
    pos = next + 1;
  }
  if (!s.valid()) throw ConfigError("shape dimensions must be positive");
  return s;
}

void Config::set(std::string_view key, std::string_view value) {
  if (key == "model") {
    if (!value.starts_with("gmm:") && !value.starts_with("bridge:")) {
      throw ConfigError("model must be gmm:<fixture> or bridge:<endpoint>");
    }
    model = value;
  } else if (key == "shape") {
    shape = parse_shape(value);
  } else if (key == "sigma_max") {
    schedule.sigma_max = parse_real(key, value);
  } else if (key == "sigma_min") {
    schedule.sigma_min = parse_real(key, value);
  } else if (key == "rho") {
    schedule.rho = parse_real(key, value);
  } else if (key == "steps") {
    schedule.steps = parse_int<int>(key, value);
  } else if (key == "projection") {
    try {
      projection = ProjectionSpec::parse(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "seed") {
    seed = parse_int<uint64_t>(key, value);
  } else if (key == "codebook") {
    codebook = value;
  } else if (key == "context") {
    context = value;
  } else if (key == "payload_bits") {
    payload_bits = parse_int<size_t>(key, value);
  } else if (key == "bpp") {
    bpp = parse_real(key, value);
    if (!(*bpp > 0)) throw ConfigError("bpp must be positive");
  } else if (key == "bridge_pool") {
    bridge_pool = parse_int<size_t>(key, value);
    if (bridge_pool == 0) throw ConfigError("bridge_pool must be at least 1");
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

Config Config::parse(std::string_view text, const std::filesystem::path& base_dir) {
  Config c;
  c.base_dir = base_dir;
  size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    // '#' starts a comment only at the beginning of a line so contexts may contain it
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read key file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

std::string Config::serialize() const {
  std::string out;
  auto put = [&](const char* k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
  if (!model.empty()) put("model", model);
  if (shape) put("shape", std::to_string(shape->channels) + "x" + std::to_string(shape->height) + "x" +
                              std::to_string(shape->width));
  put("sigma_max", real_str(schedule.sigma_max));
  put("sigma_min", real_str(schedule.sigma_min));
  put("rho", real_str(schedule.rho));
  put("steps", std::to_string(schedule.steps));
  put("projection", projection.name());
  put("seed", std::to_string(seed));
  if (!codebook.empty()) put("codebook", codebook);
  if (!context.empty()) put("context", context);
  if (payload_bits) put("payload_bits", std::to_string(*payload_bits));
  if (bpp) put("bpp", real_str(*bpp));
  if (bridge_pool != 1) put("bridge_pool", std::to_string(bridge_pool));
  return out;
}

std::filesystem::path Config::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

}  // namespace noisecoder::cli
