#include "gsreloc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace gsreloc {

namespace {

void append_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  append_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  append_u32_be(out, crc);
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void write_u32_le(std::ofstream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

std::uint32_t read_u32_le(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_png(const ImageBuffer& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw IoError("png export supports 1 or 3 channels");
  const int w = image.width;
  const int h = image.height;
  const int c = image.channels;

  // Raw scanlines, each prefixed with filter byte 0.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h) * (1 + static_cast<std::size_t>(w) * c));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) raw.push_back(to_byte(image.at(x, y, ch)));
  }
  uLongf comp_size = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_size);
  if (::compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("zlib compression failed");
  comp.resize(comp_size);

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  append_u32_be(ihdr, static_cast<std::uint32_t>(w));
  append_u32_be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);                      // bit depth
  ihdr.push_back(c == 3 ? 2 : 0);         // color type: RGB or grayscale
  ihdr.push_back(0);                      // compression
  ihdr.push_back(0);                      // filter
  ihdr.push_back(0);                      // interlace
  append_chunk(png, "IHDR", ihdr);
  append_chunk(png, "IDAT", comp);
  append_chunk(png, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!out) throw IoError("write failed: " + path);
}

void write_float_grid(const ImageBuffer& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write("FGRD", 4);
  write_u32_le(out, static_cast<std::uint32_t>(image.height));
  write_u32_le(out, static_cast<std::uint32_t>(image.width));
  write_u32_le(out, static_cast<std::uint32_t>(image.channels));
  std::vector<float> floats(image.data.size());
  for (std::size_t i = 0; i < image.data.size(); ++i)
    floats[i] = static_cast<float>(image.data[i]);
  out.write(reinterpret_cast<const char*>(floats.data()),
            static_cast<std::streamsize>(floats.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

ImageBuffer read_float_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FGRD", 4) != 0) throw ParseError("bad float grid magic");
  const std::uint32_t h = read_u32_le(in);
  const std::uint32_t w = read_u32_le(in);
  const std::uint32_t c = read_u32_le(in);
  if (!in) throw ParseError("truncated float grid header");
  ImageBuffer img(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  std::vector<float> floats(img.data.size());
  in.read(reinterpret_cast<char*>(floats.data()),
          static_cast<std::streamsize>(floats.size() * sizeof(float)));
  if (!in) throw ParseError("truncated float grid data");
  for (std::size_t i = 0; i < floats.size(); ++i) img.data[i] = floats[i];
  return img;
}

void write_float_vector(const std::vector<double>& values, const std::string& path) {
  ImageBuffer img(static_cast<int>(values.size()), 1, 1);
  img.data = values;
  write_float_grid(img, path);
}

std::vector<double> read_float_vector(const std::string& path) {
  return read_float_grid(path).data;
}

}  // namespace gsreloc
