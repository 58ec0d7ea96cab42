#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsv/synthetic.hpp"

namespace gsv {

inline constexpr int kSequenceFormatVersion = 1;

/// A frame sequence on disk. Paths are stored relative to the manifest's
/// directory and resolved on load. Empty oracle/label entries mean "none
/// for this frame".
struct SeqManifest {
  std::filesystem::path base;
  std::vector<std::filesystem::path> frames;
  std::vector<std::filesystem::path> oracle;  // empty or one per frame
  std::vector<std::filesystem::path> labels;  // empty or one per frame
  std::size_t classes = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base / p; }
};

/// Throws IoError naming the first missing file; std::invalid_argument for
/// inconsistent contents.
SeqManifest load_sequence(const std::filesystem::path& manifest);
void save_sequence(const std::filesystem::path& manifest, const SeqManifest& seq);

/// Loads frames and labels of a sequence; frames without labels get an
/// empty LabelMap. Frame sizes are checked against the manifest.
Snippet load_snippet(const SeqManifest& seq);

/// A dataset file lists sequence manifests (relative to itself).
std::vector<std::filesystem::path> load_dataset(const std::filesystem::path& dataset);
void save_dataset(const std::filesystem::path& dataset, const std::vector<std::filesystem::path>& sequences);

/// Writes frames, labels and one-hot oracle maps for `snippet` under `dir`
/// plus its manifest; returns the manifest path.
std::filesystem::path write_snippet(const std::filesystem::path& dir, const Snippet& snippet, std::size_t classes);

}  // namespace gsv
