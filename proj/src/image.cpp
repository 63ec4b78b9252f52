#include "edgereg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "edgereg/errors.hpp"

namespace edgereg {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h), data(3 * static_cast<std::size_t>(w) * h) {
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill.r;
    data[i + 1] = fill.g;
    data[i + 2] = fill.b;
  }
}

GrayImage to_gray(const RgbImage& img) {
  GrayImage g(img.width, img.height);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const double y = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
    g.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return g;
}

RgbImage to_rgb(const GrayImage& img) {
  RgbImage c(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) c.data[3 * i] = c.data[3 * i + 1] = c.data[3 * i + 2] = img.data[i];
  return c;
}

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

RgbImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw ParseError(path.string() + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path.string() + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(3 * w)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormat(path.string() + ": unsupported PNG layout");
  }
  RgbImage img(w, h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = img.data.data() + 3 * static_cast<std::size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, int w, int h, int channels, const std::uint8_t* data) {
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Netpbm header token, skipping whitespace and comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  for (;;) {
    const int c = in.get();
    if (c == EOF) break;
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

RgbImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    throw UnsupportedFormat(path.string() + ": unsupported netpbm type '" + magic + "'");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pnm_token(in));
    h = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed netpbm header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw UnsupportedFormat(path.string() + ": only 8-bit netpbm images are supported");
  const int channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
  if (magic == "P5" || magic == "P6") {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw ParseError(path.string() + ": truncated pixel data");
  } else {
    for (auto& v : raw) {
      int x;
      if (!(in >> x) || x < 0 || x > maxval) throw ParseError(path.string() + ": bad ASCII pixel value");
      v = static_cast<std::uint8_t>(x);
    }
  }
  if (maxval != 255) {
    for (auto& v : raw) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
  }
  RgbImage img(w, h);
  if (channels == 3) {
    img.data = std::move(raw);
  } else {
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = raw[i];
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, int w, int h, int channels, const std::uint8_t* data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (channels == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(static_cast<std::size_t>(w) * h * channels));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  throw UnsupportedFormat(path.string() + ": unsupported image extension");
}

GrayImage read_gray(const std::filesystem::path& path) { return to_gray(read_image(path)); }

void write_image(const RgbImage& img, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(path, img.width, img.height, 3, img.data.data());
  if (ext == ".ppm" || ext == ".pnm") return write_pnm(path, img.width, img.height, 3, img.data.data());
  if (ext == ".pgm") {
    const GrayImage g = to_gray(img);
    return write_pnm(path, g.width, g.height, 1, g.data.data());
  }
  throw UnsupportedFormat(path.string() + ": unsupported image extension");
}

void write_image(const GrayImage& img, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_png(path, img.width, img.height, 1, img.data.data());
  if (ext == ".pgm" || ext == ".pnm") return write_pnm(path, img.width, img.height, 1, img.data.data());
  if (ext == ".ppm") return write_image(to_rgb(img), path);
  throw UnsupportedFormat(path.string() + ": unsupported image extension");
}

}  // namespace edgereg
