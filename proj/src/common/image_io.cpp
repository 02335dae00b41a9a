#include "hitop/common/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hitop/common/error.hpp"

namespace hitop::io {

namespace {

png_image gray_image_header(const Grid<std::uint8_t>& image) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.cols());
  png.height = static_cast<png_uint_32>(image.rows());
  png.format = PNG_FORMAT_GRAY;
  return png;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Grid<std::uint8_t>& image) {
  if (image.empty()) throw ContractError("cannot encode an empty image");
  png_image png = gray_image_header(image);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.values().data(), 0, nullptr))
    throw Error(std::string("png sizing failed: ") + png.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.values().data(), 0, nullptr))
    throw Error(std::string("png encoding failed: ") + png.message);
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const Grid<std::uint8_t>& image) {
  auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Grid<std::uint8_t> read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw LoadError("cannot read png " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw LoadError("corrupted png " + path.string() + ": " + png.message);
  }
  return Grid<std::uint8_t>(static_cast<int>(png.height), static_cast<int>(png.width), std::move(buffer));
}

Grid<std::uint8_t> density_to_gray(const DensityGrid& density) {
  Grid<std::uint8_t> out(density.rows(), density.cols());
  for (std::size_t i = 0; i < density.size(); ++i) {
    double v = std::clamp(density[i], 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}

Grid<std::uint8_t> mask_to_gray(const Mask& mask) {
  Grid<std::uint8_t> out(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 255 : 0;
  return out;
}

Mask gray_to_mask(const Grid<std::uint8_t>& gray) {
  Mask out(gray.rows(), gray.cols());
  for (std::size_t i = 0; i < gray.size(); ++i) out[i] = gray[i] >= 128 ? 1 : 0;
  return out;
}

void write_npy(const std::filesystem::path& path, const DensityGrid& grid) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + std::to_string(grid.rows()) + ", " +
                       std::to_string(grid.cols()) + "), }";
  // magic(6) + version(2) + length(2) + header + '\n' is padded to a multiple of 64.
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header += '\n';
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write("\x93NUMPY\x01\x00", 8);
  const unsigned char len[2] = {static_cast<unsigned char>(header.size() & 0xff),
                                static_cast<unsigned char>(header.size() >> 8)};
  out.write(reinterpret_cast<const char*>(len), 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(grid.values().data()), static_cast<std::streamsize>(grid.size() * 8));
  if (!out) throw Error("cannot write " + path.string());
}

DensityGrid read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw LoadError("not an npy file: " + path.string());
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (b[1] << 8);
  } else {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), header_len);
  if (!in) throw LoadError("truncated npy header: " + path.string());

  bool is_f8 = header.find("'<f8'") != std::string::npos;
  bool is_f4 = header.find("'<f4'") != std::string::npos;
  if (!is_f8 && !is_f4) throw LoadError("unsupported npy dtype in " + path.string());
  if (header.find("'fortran_order': True") != std::string::npos)
    throw LoadError("fortran-ordered npy not supported: " + path.string());
  auto lp = header.find('(');
  auto rp = header.find(')', lp);
  if (lp == std::string::npos || rp == std::string::npos) throw LoadError("bad npy shape: " + path.string());
  std::string shape = header.substr(lp + 1, rp - lp - 1);
  std::vector<long> dims;
  std::stringstream ss(shape);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto first = tok.find_first_not_of(' ');
    if (first == std::string::npos) continue;
    dims.push_back(std::stol(tok.substr(first)));
  }
  // Accept (H, W) and (1, H, W) / (H, W, 1).
  std::vector<long> squeezed;
  for (long d : dims)
    if (d != 1 || dims.size() == 2) squeezed.push_back(d);
  if (squeezed.size() != 2) throw LoadError("npy array is not 2D: " + path.string());
  const long rows = squeezed[0], cols = squeezed[1];
  const std::size_t count = static_cast<std::size_t>(rows * cols);
  std::vector<double> values(count);
  if (is_f8) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8));
  } else {
    std::vector<float> tmp(count);
    in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(count * 4));
    std::copy(tmp.begin(), tmp.end(), values.begin());
  }
  if (!in) throw LoadError("truncated npy payload: " + path.string());
  return DensityGrid(static_cast<int>(rows), static_cast<int>(cols), std::move(values));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace hitop::io
