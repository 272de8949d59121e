#include "noisecoder/codec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <png.h>

#include "noisecoder/core/nzt.hpp"

namespace noisecoder::codec {

uint8_t quantize_u8(double x) {
  if (std::isnan(x)) throw CodecError("cannot quantize NaN");
  // std::round is half-away-from-zero; the argument is >= 0 after clamping anyway.
  const double u = std::round((std::clamp(x, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<uint8_t>(std::clamp(u, 0.0, 255.0));
}

double dequantize_u8(uint8_t u) { return u / 127.5 - 1.0; }

ByteImage quantize(const LatentTensor& x) {
  ByteImage img{x.shape(), std::vector<uint8_t>(x.size())};
  for (size_t i = 0; i < x.size(); ++i) img.data[i] = quantize_u8(x[i]);
  return img;
}

LatentTensor dequantize(const ByteImage& image) {
  if (image.data.size() != image.shape.size()) throw CodecError("image data does not match its shape");
  std::vector<double> out(image.data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = dequantize_u8(image.data[i]);
  return LatentTensor(image.shape, std::move(out));
}

LatentTensor requantize(const LatentTensor& x) { return dequantize(quantize(x)); }

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw CodecError("cannot open " + path.string());
  return f;
}

struct PngErr {
  char message[256] = "unknown error";
};

void png_fail(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngErr*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof(err->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; nothing with a destructor may live in
// these frames between setjmp and the libpng calls.
bool png_encode(std::FILE* f, const uint8_t* rgb, uint32_t w, uint32_t h, PngErr& err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (uint32_t y = 0; y < h; ++y) png_write_row(png, rgb + size_t{3} * w * y);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct PngHeader {
  uint32_t width = 0;
  uint32_t height = 0;
  int color = 0;
  int depth = 0;
};

// Two phases so the pixel buffer can be sized between them: `rgb` is null on
// the first call (header only).
bool png_decode(std::FILE* f, PngHeader& hdr, uint8_t* rgb, PngErr& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  hdr.width = png_get_image_width(png, info);
  hdr.height = png_get_image_height(png, info);
  hdr.color = png_get_color_type(png, info);
  hdr.depth = png_get_bit_depth(png, info);
  if (rgb != nullptr) {
    const int passes = png_set_interlace_handling(png);
    png_read_update_info(png, info);
    for (int pass = 0; pass < passes; ++pass)
      for (uint32_t y = 0; y < hdr.height; ++y) png_read_row(png, rgb + size_t{3} * hdr.width * y, nullptr);
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

void write_png(const ByteImage& image, const std::filesystem::path& path) {
  if (image.shape.channels != 3) throw CodecError("png needs a 3-channel image");
  if (image.data.size() != image.shape.size()) throw CodecError("image data does not match its shape");
  std::vector<uint8_t> rgb(image.data.size());
  for (uint32_t c = 0; c < 3; ++c)
    for (size_t p = 0; p < image.shape.plane(); ++p) rgb[3 * p + c] = image.data[c * image.shape.plane() + p];

  File f = open_file(path, "wb");
  PngErr err;
  if (!png_encode(f.get(), rgb.data(), image.shape.width, image.shape.height, err)) {
    throw CodecError(std::string("png: ") + err.message);
  }
  if (std::fflush(f.get()) != 0) throw CodecError("write failed: " + path.string());
}

ByteImage read_png(const std::filesystem::path& path) {
  File f = open_file(path, "rb");
  uint8_t sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw CodecError("not a png file: " + path.string());
  }
  std::rewind(f.get());
  PngErr err;
  PngHeader hdr;
  if (!png_decode(f.get(), hdr, nullptr, err)) throw CodecError(std::string("png: ") + err.message);
  if (hdr.color != PNG_COLOR_TYPE_RGB) throw CodecError("expected 3-channel 8-bit RGB png");
  if (hdr.depth != 8) throw CodecError("expected 8-bit png");

  std::vector<uint8_t> rgb(size_t{3} * hdr.width * hdr.height);
  std::rewind(f.get());
  if (!png_decode(f.get(), hdr, rgb.data(), err)) throw CodecError(std::string("png: ") + err.message);

  ByteImage out{Shape{3, hdr.height, hdr.width}, std::vector<uint8_t>(rgb.size())};
  for (uint32_t c = 0; c < 3; ++c)
    for (size_t p = 0; p < out.shape.plane(); ++p) out.data[c * out.shape.plane() + p] = rgb[3 * p + c];
  return out;
}

void write_float(const LatentTensor& x, const std::filesystem::path& path) { tensor_write(x, path); }

LatentTensor read_float(const std::filesystem::path& path) { return tensor_read(path); }

ImageFormat format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".nzt") return ImageFormat::nzt;
  throw CodecError("unknown image extension '" + ext + "' (use .png or .nzt)");
}

void save_image(const LatentTensor& x, const std::filesystem::path& path) {
  if (format_for(path) == ImageFormat::png) {
    write_png(quantize(x), path);
  } else {
    write_float(x, path);
  }
}

LatentTensor load_image(const std::filesystem::path& path) {
  if (format_for(path) == ImageFormat::png) return dequantize(read_png(path));
  return read_float(path);
}

}  // namespace noisecoder::codec
