#include "gsv/io.hpp"

#include <bit>
#include <cctype>
#include <fstream>
#include <sstream>

namespace gsv {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path, "read failed");
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path, "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError(path, "rename failed: " + ec.message());
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw std::invalid_argument("truncated binary data");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

float get_f32(std::string_view bytes, std::size_t offset) { return std::bit_cast<float>(get_u32(bytes, offset)); }

namespace {

struct PnmHeader {
  std::size_t width = 0, height = 0, maxval = 0, data_offset = 0;
};

PnmHeader parse_pnm_header(std::string_view bytes, std::string_view magic) {
  if (bytes.substr(0, 2) != magic) {
    throw std::invalid_argument("expected " + std::string(magic) + " magic number");
  }
  std::size_t pos = 2;
  auto next_number = [&]() -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw std::invalid_argument("malformed header");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    return v;
  };
  PnmHeader h;
  h.width = next_number();
  h.height = next_number();
  h.maxval = next_number();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw std::invalid_argument("malformed header");
  }
  h.data_offset = pos + 1;
  if (h.maxval != 255) throw std::invalid_argument("only 8-bit maxval 255 is supported");
  if (h.width == 0 || h.height == 0) throw std::invalid_argument("empty image");
  return h;
}

std::string pnm_header(std::string_view magic, std::size_t w, std::size_t h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

}  // namespace

RgbImage parse_ppm(std::string_view bytes) {
  const auto h = parse_pnm_header(bytes, "P6");
  const std::size_t n = h.width * h.height * 3;
  if (bytes.size() < h.data_offset + n) throw std::invalid_argument("truncated pixel data");
  RgbImage img(h.height, h.width);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
            bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset + n), img.rgb.begin());
  return img;
}

std::string encode_ppm(const RgbImage& img) {
  std::string out = pnm_header("P6", img.width, img.height);
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

LabelMap parse_pgm(std::string_view bytes) {
  const auto h = parse_pnm_header(bytes, "P5");
  const std::size_t n = h.width * h.height;
  if (bytes.size() < h.data_offset + n) throw std::invalid_argument("truncated pixel data");
  LabelMap map(h.height, h.width);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
            bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset + n), map.labels.begin());
  return map;
}

std::string encode_pgm(const LabelMap& map) {
  std::string out = pnm_header("P5", map.width, map.height);
  out.append(reinterpret_cast<const char*>(map.labels.data()), map.labels.size());
  return out;
}

Tensor parse_prob(std::string_view bytes) {
  if (bytes.substr(0, 4) != "GSVP") throw std::invalid_argument("not a probability map (bad magic)");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kProbFormatVersion) {
    throw std::invalid_argument("unsupported probability map version " + std::to_string(version));
  }
  const std::size_t c = get_u32(bytes, 8), h = get_u32(bytes, 12), w = get_u32(bytes, 16);
  const std::size_t n = c * h * w;
  if (bytes.size() != 20 + 4 * n) {
    throw std::invalid_argument("probability map payload is " + std::to_string(bytes.size() - 20) +
                                " bytes, header " + std::to_string(c) + "x" + std::to_string(h) + "x" +
                                std::to_string(w) + " needs " + std::to_string(4 * n));
  }
  Tensor t(chw(c, h, w));
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<Real>(get_f32(bytes, 20 + 4 * i));
  return t;
}

std::string encode_prob(const Tensor& t) {
  std::string out = "GSVP";
  out.reserve(20 + 4 * t.size());
  put_u32(out, kProbFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(t.channels()));
  put_u32(out, static_cast<std::uint32_t>(t.height()));
  put_u32(out, static_cast<std::uint32_t>(t.width()));
  for (Real v : t.data()) put_f32(out, static_cast<float>(v));
  return out;
}

namespace {

template <typename F>
auto parse_file(const fs::path& path, F&& parse) {
  const std::string bytes = read_file(path);
  try {
    return parse(bytes);
  } catch (const std::invalid_argument& e) {
    throw IoError(path, e.what());
  }
}

}  // namespace

RgbImage read_ppm(const fs::path& path) { return parse_file(path, parse_ppm); }
void write_ppm(const fs::path& path, const RgbImage& img) { write_file_atomic(path, encode_ppm(img)); }
LabelMap read_pgm(const fs::path& path) { return parse_file(path, parse_pgm); }
void write_pgm(const fs::path& path, const LabelMap& map) { write_file_atomic(path, encode_pgm(map)); }
Tensor read_prob(const fs::path& path) { return parse_file(path, parse_prob); }
void write_prob(const fs::path& path, const Tensor& t) { write_file_atomic(path, encode_prob(t)); }

}  // namespace gsv
