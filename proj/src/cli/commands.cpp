#include "noisecoder/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "noisecoder/bridge/frame.hpp"
#include "noisecoder/cli/config.hpp"
#include "noisecoder/codec.hpp"
#include "noisecoder/core/nzt.hpp"
#include "noisecoder/diagnostics.hpp"
#include "noisecoder/metrics.hpp"
#include "noisecoder/projection.hpp"
#include "noisecoder/sampler.hpp"
#include "noisecoder/score_models/bridge_model.hpp"
#include "noisecoder/score_models/gmm.hpp"
#include "noisecoder/stego.hpp"

namespace noisecoder::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(int code, const std::string& message) { throw CliError(code, message); }

std::string kv(const char* key, double v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s=%.6f\n", key, v);
  return buf;
}

std::string kv(const char* key, size_t v) { return std::string(key) + "=" + std::to_string(v) + "\n"; }

std::string kv(const char* key, const std::string& v) { return std::string(key) + "=" + v + "\n"; }

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) fail(kExitUnreachable, std::string(what) + " not found: " + p.string());
}

// Flags shared by every command that loads a key file.
struct KeyFlags {
  std::string key_path;
  std::string seed;
  std::string projection;
  std::string codebook;
  std::string model;
  int steps = 0;
};

void add_key_flags(CLI::App* cmd, KeyFlags& f) {
  cmd->add_option("--key", f.key_path, "shared key file")->required();
  cmd->add_option("--seed", f.seed, "override the key seed");
  cmd->add_option("--projection", f.projection, "override the projection");
  cmd->add_option("--codebook", f.codebook, "codebook file (multichannel), or 'seed'");
  cmd->add_option("--model", f.model, "override the model");
  cmd->add_option("--steps", f.steps, "override the number of sampling steps");
}

Config load_config(const KeyFlags& f) {
  require_file(f.key_path, "key file");
  Config c;
  try {
    c = Config::load(f.key_path);
    if (!f.seed.empty()) c.set("seed", f.seed);
    if (!f.projection.empty()) c.set("projection", f.projection);
    if (!f.model.empty()) c.set("model", f.model);
    if (f.steps > 0) c.schedule.steps = f.steps;
  } catch (const ConfigError& e) {
    fail(kExitUsage, e.what());
  }
  if (!f.codebook.empty()) c.codebook = f.codebook == "seed" ? f.codebook : fs::absolute(f.codebook).string();
  if (c.model.empty()) fail(kExitUsage, "key file names no model");
  return c;
}

std::unique_ptr<ScoreModel> load_model(const Config& c) {
  if (c.model.starts_with("gmm:")) {
    const fs::path p = c.resolve(c.model.substr(4));
    require_file(p, "model fixture");
    require_file(GaussianMixtureModel::params_path(p), "model parameters");
    return std::make_unique<GaussianMixtureModel>(GaussianMixtureModel::load(p));
  }
  if (!c.shape) fail(kExitUsage, "bridge models need 'shape = CxHxW' in the key file");
  const std::string endpoint = resolve_bridge_endpoint(c.model.substr(7));
  auto model = std::make_unique<BridgeModel>(endpoint, *c.shape, c.bridge_pool);
  try {
    model->connect();
  } catch (const bridge::BridgeError& e) {
    const bool down = e.code() == bridge::Errc::transport || e.code() == bridge::Errc::connection_lost ||
                      e.code() == bridge::Errc::timeout;
    fail(kExitUnreachable, (down ? std::string("model unreachable: ") : std::string("model rejected: ")) + e.what());
  }
  return model;
}

StegoKey make_key(const Config& c, Shape shape) {
  StegoKey key{c.projection, c.seed, std::nullopt};
  if (c.projection.kind == ProjectionKind::multichannel) {
    if (c.codebook.empty()) fail(kExitCapacity, "multichannel projection needs a codebook (--codebook)");
    if (c.codebook == "seed") {
      key.codebook = Codebook::from_seed(shape, c.seed);
    } else {
      const fs::path p = c.resolve(c.codebook);
      require_file(p, "codebook");
      key.codebook = Codebook::load(p);
      if (key.codebook->shape != shape) {
        fail(kExitCapacity, "codebook shape " + key.codebook->shape.str() + " does not match model " + shape.str());
      }
    }
  }
  return key;
}

SigmaSchedule make_schedule(const Config& c) {
  try {
    return SigmaSchedule::build(c.schedule);
  } catch (const std::invalid_argument& e) {
    fail(kExitUsage, e.what());
  }
}

// Flag, then key file (payload_bits, bpp), then the full capacity.
size_t payload_length(const Config& c, Shape shape, long flag_bits) {
  if (flag_bits >= 0) return static_cast<size_t>(flag_bits);
  if (c.payload_bits) return *c.payload_bits;
  if (c.bpp) return static_cast<size_t>(std::llround(*c.bpp * static_cast<double>(shape.plane())));
  return size_t{c.projection.bits} * shape.plane() * projection::max_message_channels(c.projection, shape);
}

uint32_t checked_channels(size_t n_bits, const ProjectionSpec& spec, Shape shape) {
  if (n_bits == 0) fail(kExitCapacity, "empty payload");
  const uint32_t need = channels_needed(n_bits, spec, shape);
  if (need > projection::max_message_channels(spec, shape)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "capacity exceeded; use multibits (%.4f bpp requested, %s carries at most %.4f)",
                  static_cast<double>(n_bits) / static_cast<double>(shape.plane()), spec.name().c_str(),
                  static_cast<double>(spec.bits) * projection::max_message_channels(spec, shape));
    fail(kExitCapacity, buf);
  }
  return need;
}

LatentTensor load_image_or_fail(const fs::path& p) {
  require_file(p, "image");
  try {
    return codec::load_image(p);
  } catch (const codec::CodecError& e) {
    fail(kExitUsage, e.what());
  } catch (const NztError& e) {
    fail(kExitUsage, std::string("bad image file: ") + e.what());
  }
}

Bits random_payload(uint64_t seed, size_t n) {
  Rng rng(seed, Stream::payload);
  Bits b(n);
  for (auto& v : b) v = rng.bit();
  return b;
}

struct HideResult {
  LatentTensor image;
  diagnostics::CollapseReport report;
};

HideResult hide_one(const Bits& payload, const StegoKey& key, const SigmaSchedule& schedule, ScoreModel& model,
                    const std::string& context, bool force) {
  const Shape shape = model.shape();
  const uint32_t channels = checked_channels(payload.size(), key.projection, shape);
  const Message msg = make_message(payload, key.projection, shape, channels, key.seed);
  const LatentTensor carrier = projection::project(msg, key, shape);
  HideResult r{{}, diagnostics::check_collapse(carrier)};
  if (r.report.overall() == diagnostics::Verdict::fail && !force) return r;
  r.image = heun_forward(carrier, schedule, model, context);
  return r;
}

// ---------------------------------------------------------------- commands

struct HideArgs {
  KeyFlags key;
  std::string msg, out;
  bool force = false;
};

int cmd_hide(const HideArgs& a, std::ostream& out) {
  const Config c = load_config(a.key);
  codec::format_for(a.out);
  require_file(a.msg, "message file");
  const Bits payload = read_bits_file(a.msg);
  auto model = load_model(c);
  const Shape shape = model->shape();
  const StegoKey key = make_key(c, shape);
  const auto schedule = make_schedule(c);

  const HideResult r = hide_one(payload, key, schedule, *model, c.context, a.force);
  out << kv("bpp", metrics::bits_per_pixel(payload.size(), shape.width, shape.height));
  out << kv("n_bits", payload.size());
  out << kv("collapse_verdict", std::string(diagnostics::verdict_name(r.report.overall())));
  if (r.image.empty()) fail(kExitCollapse, "carrier noise failed the collapse check (use --force to override)");
  codec::save_image(r.image, a.out);
  return kExitOk;
}

struct ExtractArgs {
  KeyFlags key;
  std::string img, out;
  long bits = -1;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  const Config c = load_config(a.key);
  const LatentTensor image = load_image_or_fail(a.img);
  auto model = load_model(c);
  const Shape shape = model->shape();
  if (image.shape() != shape) fail(kExitUsage, "image shape " + image.shape().str() + " does not match model " + shape.str());
  const StegoKey key = make_key(c, shape);
  const auto schedule = make_schedule(c);
  const size_t n = payload_length(c, shape, a.bits);
  const uint32_t channels = checked_channels(n, c.projection, shape);

  Message m = extract(image, key, channels, schedule, *model, c.context);
  m.bits.resize(n);
  write_bits_file(a.out, m.bits);
  out << kv("n_bits", n);
  return kExitOk;
}

struct SampleArgs {
  KeyFlags key;
  size_t n = 0;
  std::string outdir;
  std::string format = "png";
  unsigned jobs = 1;
  long bits = -1;
  bool force = false;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  const Config c = load_config(a.key);
  if (a.format != "png" && a.format != "nzt") fail(kExitUsage, "--format must be png or nzt");
  fs::create_directories(a.outdir);
  auto model = load_model(c);
  const Shape shape = model->shape();
  const StegoKey base_key = make_key(c, shape);
  const auto schedule = make_schedule(c);
  const size_t n_bits = payload_length(c, shape, a.bits);
  checked_channels(n_bits, c.projection, shape);

  std::vector<std::string> lines(a.n);
  std::atomic<size_t> next{0};
  std::atomic<size_t> collapsed{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= a.n) return;
      try {
        const uint64_t seed = Rng(c.seed, Stream::image_seed, i).next_u64();
        StegoKey key = base_key;
        key.seed = seed;
        const Bits payload = random_payload(seed, n_bits);
        const HideResult r = hide_one(payload, key, schedule, *model, c.context, a.force);
        if (r.image.empty()) {
          ++collapsed;
          continue;
        }
        char stem[32];
        std::snprintf(stem, sizeof(stem), "img_%05zu", i);
        const std::string img = std::string(stem) + "." + a.format;
        const std::string bits = std::string(stem) + ".bits";
        codec::save_image(r.image, fs::path(a.outdir) / img);
        write_bits_file(fs::path(a.outdir) / bits, payload);
        lines[i] = img + " " + bits + " " + std::to_string(seed);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(a.n);
        return;
      }
    }
  };
  const unsigned jobs = model->concurrent_safe() ? std::max(1u, a.jobs) : 1u;
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ofstream manifest(fs::path(a.outdir) / "manifest.txt");
  size_t written = 0;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    manifest << l << "\n";
    ++written;
  }
  if (!manifest) fail(kExitUsage, "cannot write manifest");
  out << kv("n_images", written);
  out << kv("bpp", metrics::bits_per_pixel(n_bits, shape.width, shape.height));
  if (collapsed > 0) fail(kExitCollapse, std::to_string(collapsed.load()) + " carriers failed the collapse check");
  return kExitOk;
}

struct DiagnoseArgs {
  KeyFlags key;
  std::string msg;
  std::string noise;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
  LatentTensor z;
  if (!a.noise.empty()) {
    require_file(a.noise, "noise tensor");
    z = tensor_read(a.noise);
  } else {
    if (a.key.key_path.empty()) fail(kExitUsage, "diagnose needs --noise or --key");
    const Config c = load_config(a.key);
    auto model = load_model(c);
    const Shape shape = model->shape();
    const StegoKey key = make_key(c, shape);
    Bits payload;
    if (!a.msg.empty()) {
      require_file(a.msg, "message file");
      payload = read_bits_file(a.msg);
    } else {
      payload = random_payload(c.seed, payload_length(c, shape, -1));
    }
    const uint32_t channels = checked_channels(payload.size(), key.projection, shape);
    z = projection::project(make_message(payload, key.projection, shape, channels, key.seed), key, shape);
  }
  if (z.size() < 100) fail(kExitUsage, "tensor too small for collapse check (need >= 100 elements)");
  const auto report = diagnostics::check_collapse(z);
  out << diagnostics::format_report(report);
  return report.overall() == diagnostics::Verdict::fail ? kExitCollapse : kExitOk;
}

struct KeygenArgs {
  std::string out;
  std::string model;
  std::string shape;
  std::string projection = "mb";
  std::string codebook_out;
  std::string seed;
  int steps = 40;
};

int cmd_keygen(const KeygenArgs& a, std::ostream& out) {
  Config c;
  try {
    c.set("model", a.model);
    if (!a.shape.empty()) c.set("shape", a.shape);
    c.set("projection", a.projection);
    c.schedule.steps = a.steps;
    if (a.seed.empty()) {
      std::random_device rd;
      c.seed = (uint64_t{rd()} << 32) | rd();
    } else {
      c.set("seed", a.seed);
    }
  } catch (const ConfigError& e) {
    fail(kExitUsage, e.what());
  }
  if (c.projection.kind == ProjectionKind::multichannel) {
    if (a.codebook_out.empty()) {
      c.codebook = "seed";
    } else {
      Shape shape;
      if (c.shape) {
        shape = *c.shape;
      } else {
        shape = load_model(c)->shape();
      }
      Codebook::from_seed(shape, c.seed).save(a.codebook_out);
      c.codebook = fs::absolute(a.codebook_out).string();
    }
  }
  std::ofstream f(a.out);
  f << "# shared stego key; both parties need an identical copy\n" << c.serialize();
  if (!f) fail(kExitUsage, "cannot write " + a.out);
  out << kv("seed", static_cast<size_t>(c.seed));
  return kExitOk;
}

struct FixtureArgs {
  std::string out;
  std::string shape = "3x16x16";
  uint32_t components = 4;
  double stddev = 0.005;
  double bound = 0.8;
  uint64_t seed = 2024;
};

int cmd_make_fixture(const FixtureArgs& a, std::ostream& out) {
  Shape shape;
  try {
    shape = parse_shape(a.shape);
  } catch (const ConfigError& e) {
    fail(kExitUsage, e.what());
  }
  const auto gmm = GaussianMixtureModel::make_fixture(shape, a.components, a.stddev, a.bound, a.seed);
  gmm.save(a.out);
  out << kv("components", size_t{a.components});
  out << kv("means", a.out);
  out << kv("params", GaussianMixtureModel::params_path(a.out).string());
  return kExitOk;
}

struct EvalArgs {
  std::string a, b;
  uint32_t bins = 50;
  std::string hist_out;
};

std::vector<double> read_scores(const std::string& path) {
  require_file(path, "score file");
  const NztArray arr = read_nzt(path);
  return {arr.data.begin(), arr.data.end()};
}

metrics::FeatureSet read_features(const std::string& path) {
  require_file(path, "feature file");
  return metrics::FeatureSet::from_nzt(read_nzt(path));
}

int cmd_eval(const std::string& what, const EvalArgs& a, std::ostream& out) {
  if (what == "acc") {
    require_file(a.a, "bits file");
    require_file(a.b, "bits file");
    out << kv("acc", metrics::accuracy(read_bits_file(a.a), read_bits_file(a.b)));
  } else if (what == "pe") {
    out << kv("pe", metrics::detection_error(read_scores(a.a), read_scores(a.b)));
  } else if (what == "frechet") {
    out << kv("frechet", metrics::frechet_distance(read_features(a.a), read_features(a.b)));
  } else if (what == "hist") {
    require_file(a.a, "tensor");
    require_file(a.b, "tensor");
    const auto h = diagnostics::error_histogram(tensor_read(a.a), tensor_read(a.b), a.bins);
    out << kv("mean", h.mean) << kv("std", h.stddev) << kv("max_abs", h.max_abs);
    if (!a.hist_out.empty()) {
      std::ofstream f(a.hist_out);
      f << diagnostics::format_histogram(h);
      if (!f) fail(kExitUsage, "cannot write " + a.hist_out);
    }
  }
  return kExitOk;
}

}  // namespace

Bits read_bits_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(kExitUnreachable, "cannot read " + path.string());
  Bits bits;
  char ch;
  while (in.get(ch)) {
    if (ch == '0' || ch == '1') {
      bits.push_back(static_cast<uint8_t>(ch - '0'));
    } else if (ch != ' ' && ch != '\n' && ch != '\r' && ch != '\t') {
      fail(kExitUsage, "bits file must contain only 0 and 1: " + path.string());
    }
  }
  return bits;
}

void write_bits_file(const fs::path& path, const Bits& bits) {
  std::string s;
  s.reserve(bits.size() + bits.size() / 64 + 1);
  for (size_t i = 0; i < bits.size(); ++i) {
    s += bits[i] ? '1' : '0';
    if (i % 64 == 63) s += '\n';
  }
  if (s.empty() || s.back() != '\n') s += '\n';
  std::ofstream f(path, std::ios::binary);
  f << s;
  if (!f) fail(kExitUsage, "cannot write " + path.string());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"noisecoder: hide messages in the initial noise of a diffusion sampler", "noisecoder"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand all help");

  HideArgs hide;
  auto* c_hide = app.add_subcommand("hide", "hide a message in a generated image");
  add_key_flags(c_hide, hide.key);
  c_hide->add_option("--msg", hide.msg, "message bits (ASCII 0/1)")->required();
  c_hide->add_option("--out", hide.out, "output image (.png or .nzt)")->required();
  c_hide->add_flag("--force", hide.force, "sample even if the carrier fails the collapse check");

  ExtractArgs ext;
  auto* c_ext = app.add_subcommand("extract", "recover a message from an image");
  add_key_flags(c_ext, ext.key);
  c_ext->add_option("--img", ext.img, "stego image (.png or .nzt)")->required();
  c_ext->add_option("--out", ext.out, "recovered bits")->required();
  c_ext->add_option("--bits", ext.bits, "payload length (default: from the key file)");

  SampleArgs smp;
  auto* c_smp = app.add_subcommand("sample", "generate stego images with random payloads");
  add_key_flags(c_smp, smp.key);
  c_smp->add_option("--n", smp.n, "number of images")->required();
  c_smp->add_option("--outdir", smp.outdir, "output directory")->required();
  c_smp->add_option("--format", smp.format, "png or nzt");
  c_smp->add_option("--jobs", smp.jobs, "parallel workers");
  c_smp->add_option("--bits", smp.bits, "payload length per image");
  c_smp->add_flag("--force", smp.force, "sample even if a carrier fails the collapse check");

  DiagnoseArgs dia;
  auto* c_dia = app.add_subcommand("diagnose", "collapse check of a carrier noise tensor");
  c_dia->add_option("--key", dia.key.key_path, "key file");
  c_dia->add_option("--seed", dia.key.seed, "override the key seed");
  c_dia->add_option("--projection", dia.key.projection, "override the projection");
  c_dia->add_option("--codebook", dia.key.codebook, "codebook file (multichannel)");
  c_dia->add_option("--msg", dia.msg, "message bits (default: random)");
  c_dia->add_option("--noise", dia.noise, "check this NZT1 tensor instead");

  KeygenArgs kg;
  auto* c_kg = app.add_subcommand("keygen", "write a fresh key file");
  c_kg->add_option("--out", kg.out, "key file to write")->required();
  c_kg->add_option("--model", kg.model, "gmm:<fixture> or bridge:<endpoint>")->required();
  c_kg->add_option("--shape", kg.shape, "CxHxW (bridge models)");
  c_kg->add_option("--projection", kg.projection, "mn, mb, mc, multibits:<b>, multichannel");
  c_kg->add_option("--seed", kg.seed, "seed (default: random)");
  c_kg->add_option("--steps", kg.steps, "sampling steps");
  c_kg->add_option("--codebook-out", kg.codebook_out, "write the multichannel codebook here");

  FixtureArgs fx;
  auto* c_fx = app.add_subcommand("make-fixture", "write a Gaussian-mixture model fixture");
  c_fx->add_option("--out", fx.out, "means file (.nzt); parameters go next to it")->required();
  c_fx->add_option("--shape", fx.shape, "CxHxW");
  c_fx->add_option("--components", fx.components, "mixture components");
  c_fx->add_option("--std", fx.stddev, "component standard deviation");
  c_fx->add_option("--bound", fx.bound, "means are uniform in [-bound, bound]");
  c_fx->add_option("--seed", fx.seed, "seed");

  EvalArgs ev;
  std::string eval_what;
  auto* c_ev = app.add_subcommand("eval", "metrics: acc, pe, frechet, hist");
  c_ev->require_subcommand(1);
  for (const char* name : {"acc", "pe", "frechet", "hist"}) {
    auto* s = c_ev->add_subcommand(name);
    s->add_option("a", ev.a)->required();
    s->add_option("b", ev.b)->required();
    if (std::string(name) == "hist") {
      s->add_option("--bins", ev.bins, "histogram bins");
      s->add_option("--out", ev.hist_out, "two-column histogram dump");
    }
    s->callback([&eval_what, name] { eval_what = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (c_hide->parsed()) return cmd_hide(hide, out);
    if (c_ext->parsed()) return cmd_extract(ext, out);
    if (c_smp->parsed()) return cmd_sample(smp, out);
    if (c_dia->parsed()) return cmd_diagnose(dia, out);
    if (c_kg->parsed()) return cmd_keygen(kg, out);
    if (c_fx->parsed()) return cmd_make_fixture(fx, out);
    if (c_ev->parsed()) return cmd_eval(eval_what, ev, out);
  } catch (const CliError& f) {
    err << "error: " << f.what() << "\n";
    return f.code();
  } catch (const bridge::BridgeError& e) {
    const bool lost = e.code() == bridge::Errc::transport || e.code() == bridge::Errc::connection_lost ||
                      e.code() == bridge::Errc::timeout;
    err << "error: " << e.what() << "\n";
    return lost ? kExitUnreachable : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace noisecoder::cli
