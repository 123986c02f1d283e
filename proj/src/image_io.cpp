#include "freqseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "freqseg/error.hpp"

namespace freqseg::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: cannot create info struct");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: failed to decode " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw IoError(path + ": unsupported channel layout");
  Image img(channels, static_cast<int>(height), static_cast<int>(width));
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        img.at(c, y, x) = pixels[static_cast<std::size_t>(y) * stride +
                                 static_cast<std::size_t>(x) * channels + c] / 255.0;
      }
    }
  }
  return img;
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ArgumentError("write_png: only 1- or 3-channel images are supported");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot create " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: cannot create info struct");
  }
  const int ch = image.channels;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(image.width) * image.height * ch);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < ch; ++c) {
        pixels[(static_cast<std::size_t>(y) * image.width + x) * ch + c] = quantize(image.at(c, y, x));
      }
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * image.width * ch;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: failed to encode " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  auto token = [&]() {
    std::string t;
    char ch = 0;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(ch))) {
        t.push_back(ch);
        break;
      }
    }
    while (in.get(ch) && !std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    return t;
  };
  if (token() != "P5") throw IoError(path + " is not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw IoError(path + ": malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw IoError(path + ": unsupported PGM header");
  std::vector<char> buf(static_cast<std::size_t>(w) * h);
  if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
    throw IoError(path + ": truncated PGM payload");
  }
  Image img(1, h, w);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    img.data[i] = static_cast<std::uint8_t>(buf[i]) / static_cast<double>(maxval);
  }
  return img;
}

void write_pgm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (std::size_t i = 0; i < image.plane_size(); ++i) {
    out.put(static_cast<char>(quantize(image.data[i])));
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_f32(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  for (double v : image.data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const unsigned char bytes[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16),
                                    static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
  if (!out) throw IoError("failed writing " + path);
}

Image read_f32(const std::string& path, int channels, int height, int width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Image img(channels, height, width);
  for (double& v : img.data) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError(path + ": truncated float32 payload");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    v = std::bit_cast<float>(bits);
  }
  return img;
}

Mask to_mask(const Image& image, double threshold) {
  Mask m(image.height, image.width);
  for (std::size_t i = 0; i < image.plane_size(); ++i) m.data[i] = image.data[i] > threshold ? 1 : 0;
  return m;
}

Image mask_image(const Mask& mask) {
  Image img(1, mask.height, mask.width);
  for (std::size_t i = 0; i < mask.data.size(); ++i) img.data[i] = mask.data[i] ? 1.0 : 0.0;
  return img;
}

Image with_channels(const Image& image, int channels) {
  if (image.channels == channels) return image;
  if (image.channels == 1) {
    Image out(channels, image.height, image.width);
    for (int c = 0; c < channels; ++c) {
      std::copy(image.data.begin(), image.data.end(),
                out.data.begin() + static_cast<std::ptrdiff_t>(c * image.plane_size()));
    }
    return out;
  }
  throw ShapeError("cannot convert a " + std::to_string(image.channels) + "-channel image to " +
                   std::to_string(channels) + " channels");
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace freqseg::io
