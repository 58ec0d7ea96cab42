#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gsv/image.hpp"

namespace gsv {

/// File-level failure; `path()` names the offending file.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Binary portable pixmap (P6, maxval 255) and graymap (P5, maxval 255).
RgbImage parse_ppm(std::string_view bytes);
std::string encode_ppm(const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

LabelMap parse_pgm(std::string_view bytes);
std::string encode_pgm(const LabelMap& map);
LabelMap read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const LabelMap& map);

/// Probability map container: "GSVP", u32 version (1), u32 C, u32 H, u32 W,
/// then C*H*W little-endian float32 values in CHW order.
inline constexpr std::uint32_t kProbFormatVersion = 1;
Tensor parse_prob(std::string_view bytes);
std::string encode_prob(const Tensor& t);
Tensor read_prob(const std::filesystem::path& path);
void write_prob(const std::filesystem::path& path, const Tensor& t);

// Little-endian scalar helpers shared by the binary formats.
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
std::uint32_t get_u32(std::string_view bytes, std::size_t offset);
float get_f32(std::string_view bytes, std::size_t offset);

}  // namespace gsv
