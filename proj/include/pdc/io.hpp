#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pdc/errors.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// ---------------------------------------------------------------------------
// PDCT tensor file format.
//   magic "PDCT", u8 version=1, u8 dtype (0 = f32), u16 rank,
//   rank x u32 extents, then raw little-endian f32 values row-major.
// In-memory tensors are f64; the file format is f32 only.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float get_f32(const unsigned char* p) {
  const std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

inline void write_pdct(const std::filesystem::path& path, const Tensor& t) {
  std::string buf;
  buf.reserve(12 + 4 * t.rank() + 4 * t.numel());
  buf += "PDCT";
  buf.push_back(1);  // version
  buf.push_back(0);  // dtype f32
  detail::put_u16(buf, static_cast<std::uint16_t>(t.rank()));
  for (std::size_t e : t.shape()) detail::put_u32(buf, static_cast<std::uint32_t>(e));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    detail::put_f32(buf, static_cast<float>(t[i]));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open for write: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw io_error("short write: " + path.string());
}

inline Tensor read_pdct(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), "PDCT", 4) != 0) {
    throw io_error("not a PDCT file: " + path.string());
  }
  if (buf[4] != 1) throw io_error("unsupported PDCT version in " + path.string());
  if (buf[5] != 0) throw io_error("unsupported PDCT dtype in " + path.string());
  const std::size_t rank = detail::get_u16(buf.data() + 6);
  std::size_t off = 8;
  if (buf.size() < off + 4 * rank) throw io_error("truncated PDCT header: " + path.string());
  std::vector<std::size_t> shape(rank);
  std::size_t numel = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = detail::get_u32(buf.data() + off);
    off += 4;
    numel *= shape[i];
  }
  if (buf.size() != off + 4 * numel) {
    throw io_error("truncated PDCT payload: " + path.string());
  }
  std::vector<double> data(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    data[i] = static_cast<double>(detail::get_f32(buf.data() + off + 4 * i));
  }
  return Tensor(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// Checkpoints: a directory of PDCT files plus manifest.txt mapping
// tensor-name -> file name (one "name file" pair per line).
// ---------------------------------------------------------------------------

inline std::string sanitize_filename(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) {
      c = '_';
    }
  }
  return s;
}

inline void save_checkpoint(const std::filesystem::path& dir,
                            const std::map<std::string, const Tensor*>& tensors) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw io_error("cannot write manifest in " + dir.string());
  for (const auto& [name, tensor] : tensors) {
    const std::string file = sanitize_filename(name) + ".pdct";
    write_pdct(dir / file, *tensor);
    manifest << name << ' ' << file << '\n';
  }
  if (!manifest) throw io_error("short manifest write in " + dir.string());
}

inline std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw io_error("no manifest.txt in " + dir.string());
  std::map<std::string, Tensor> out;
  std::string name, file;
  while (manifest >> name >> file) {
    out.emplace(name, read_pdct(dir / file));
  }
  return out;
}

// ---------------------------------------------------------------------------
// 8-bit binary PPM (P6). Images are [3,H,W] tensors with values in [0,1].
// ---------------------------------------------------------------------------

inline void write_ppm(const std::filesystem::path& path, const Tensor& img) {
  require_rank(img, 3, "write_ppm");
  if (img.extent(0) != 3) {
    throw std::invalid_argument("write_ppm: expected 3 channels, got " + img.shape_str());
  }
  const std::size_t h = img.extent(1), w = img.extent(2);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open for write: " + path.string());
  f << "P6\n" << w << ' ' << h << "\n255\n";
  std::string row;
  row.reserve(3 * w);
  for (std::size_t y = 0; y < h; ++y) {
    row.clear();
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(img(c, y, x), 0.0, 1.0);
        row.push_back(static_cast<char>(std::lround(v * 255.0)));
      }
    }
    f.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw io_error("short write: " + path.string());
}

inline Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0;
  int maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w == 0 || h == 0) {
    throw io_error("unsupported PPM: " + path.string());
  }
  f.get();  // single whitespace after header
  std::vector<char> raw(3 * w * h);
  f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!f) throw io_error("truncated PPM: " + path.string());
  Tensor img({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const unsigned char b = static_cast<unsigned char>(raw[(y * w + x) * 3 + c]);
        img(c, y, x) = static_cast<double>(b) / 255.0;
      }
    }
  }
  return img;
}

// Writes CSV rows to a file; the caller supplies fully formatted lines.
inline void write_lines(const std::filesystem::path& path,
                        const std::vector<std::string>& lines) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open for write: " + path.string());
  for (const auto& line : lines) f << line << '\n';
  if (!f) throw io_error("short write: " + path.string());
}

}  // namespace pdc
