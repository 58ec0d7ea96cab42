#include "gsv/dataset.hpp"

#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gsv/io.hpp"

namespace gsv {

using nlohmann::json;

namespace {

json parse_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

std::vector<std::filesystem::path> path_list(const json& j, const char* key) {
  std::vector<std::filesystem::path> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  for (const auto& e : *it) out.emplace_back(e.is_null() ? std::string() : e.get<std::string>());
  return out;
}

json path_json(const std::vector<std::filesystem::path>& v) {
  json a = json::array();
  for (const auto& p : v) a.push_back(p.empty() ? json(nullptr) : json(p.generic_string()));
  return a;
}

void require_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p)) throw IoError(p, "file not found");
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.%s", stem, i, ext);
  return buf;
}

}  // namespace

SeqManifest load_sequence(const std::filesystem::path& manifest) {
  const json j = parse_json(manifest);
  SeqManifest s;
  s.base = manifest.parent_path();
  try {
    if (j.value("format", "") != "gsv-sequence") throw IoError(manifest, "not a sequence manifest");
    const int version = j.at("version").get<int>();
    if (version != kSequenceFormatVersion) {
      throw IoError(manifest, "unsupported sequence format version " + std::to_string(version));
    }
    s.classes = j.at("classes").get<std::size_t>();
    s.height = j.at("height").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.frames = path_list(j, "frames");
    s.oracle = path_list(j, "oracle");
    s.labels = path_list(j, "labels");
  } catch (const json::exception& e) {
    throw IoError(manifest, std::string("malformed manifest: ") + e.what());
  }
  if (s.frames.empty()) throw std::invalid_argument(manifest.string() + ": sequence has no frames");
  for (const auto* list : {&s.oracle, &s.labels}) {
    if (!list->empty() && list->size() != s.frames.size()) {
      throw std::invalid_argument(manifest.string() + ": oracle/label lists must have one entry per frame");
    }
  }
  for (const auto* list : {&s.frames, &s.oracle, &s.labels}) {
    for (const auto& p : *list) {
      if (!p.empty()) require_file(s.resolve(p));
    }
  }
  return s;
}

void save_sequence(const std::filesystem::path& manifest, const SeqManifest& seq) {
  json j = {{"format", "gsv-sequence"},     {"version", kSequenceFormatVersion}, {"classes", seq.classes},
            {"height", seq.height},          {"width", seq.width},                {"frames", path_json(seq.frames)},
            {"oracle", path_json(seq.oracle)}, {"labels", path_json(seq.labels)}};
  write_file_atomic(manifest, j.dump(2) + "\n");
}

Snippet load_snippet(const SeqManifest& seq) {
  Snippet s;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto path = seq.resolve(seq.frames[i]);
    RgbImage img = read_ppm(path);
    if (img.height != seq.height || img.width != seq.width) {
      throw std::invalid_argument(path.string() + ": frame is " + std::to_string(img.height) + "x" +
                                  std::to_string(img.width) + ", manifest says " + std::to_string(seq.height) + "x" +
                                  std::to_string(seq.width));
    }
    s.frames.push_back(std::move(img));
    LabelMap labels;
    if (!seq.labels.empty() && !seq.labels[i].empty()) {
      const auto lp = seq.resolve(seq.labels[i]);
      labels = read_pgm(lp);
      if (labels.height != seq.height || labels.width != seq.width) {
        throw std::invalid_argument(lp.string() + ": label map size does not match the manifest");
      }
    }
    s.labels.push_back(std::move(labels));
  }
  return s;
}

std::vector<std::filesystem::path> load_dataset(const std::filesystem::path& dataset) {
  const json j = parse_json(dataset);
  std::vector<std::filesystem::path> out;
  try {
    if (j.value("format", "") != "gsv-dataset") throw IoError(dataset, "not a dataset file");
    if (j.at("version").get<int>() != 1) throw IoError(dataset, "unsupported dataset version " + j.at("version").dump());
    for (const auto& e : j.at("sequences")) {
      std::filesystem::path p = e.get<std::string>();
      if (p.is_relative()) p = dataset.parent_path() / p;
      require_file(p);
      out.push_back(p);
    }
  } catch (const json::exception& e) {
    throw IoError(dataset, std::string("malformed dataset: ") + e.what());
  }
  return out;
}

void save_dataset(const std::filesystem::path& dataset, const std::vector<std::filesystem::path>& sequences) {
  json list = json::array();
  for (const auto& p : sequences) list.push_back(p.generic_string());
  write_file_atomic(dataset, json{{"format", "gsv-dataset"}, {"version", 1}, {"sequences", list}}.dump(2) + "\n");
}

std::filesystem::path write_snippet(const std::filesystem::path& dir, const Snippet& snippet, std::size_t classes) {
  SeqManifest seq;
  seq.base = dir;
  seq.classes = classes;
  seq.height = snippet.frames.at(0).height;
  seq.width = snippet.frames.at(0).width;
  for (std::size_t i = 0; i < snippet.frames.size(); ++i) {
    seq.frames.emplace_back(numbered("frame", i, "ppm"));
    write_ppm(dir / seq.frames.back(), snippet.frames[i]);
    if (i < snippet.labels.size() && snippet.labels[i].height != 0) {
      seq.labels.emplace_back(numbered("label", i, "pgm"));
      write_pgm(dir / seq.labels.back(), snippet.labels[i]);
      seq.oracle.emplace_back(numbered("oracle", i, "prob"));
      write_prob(dir / seq.oracle.back(), label_probabilities(snippet.labels[i], classes, 8));
    } else {
      seq.labels.emplace_back();
      seq.oracle.emplace_back();
    }
  }
  const auto manifest = dir / "sequence.json";
  save_sequence(manifest, seq);
  return manifest;
}

}  // namespace gsv
