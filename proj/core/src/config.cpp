#include "gsv/config.hpp"

#include <stdexcept>

#include "gsv/io.hpp"

namespace gsv {

using nlohmann::json;

namespace {

/// Reads `key` into `out` when present and erases it, so leftovers can be
/// reported as unknown.
template <typename T>
void take(json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  out = it->template get<T>();
  obj.erase(it);
}

void reject_unknown(const json& obj, const std::string& section) {
  if (!obj.empty()) throw std::invalid_argument("config: unknown key '" + section + "." + obj.begin().key() + "'");
}

json section(json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end()) return json::object();
  if (!it->is_object()) throw std::invalid_argument(std::string("config: '") + key + "' must be an object");
  json s = *it;
  root.erase(it);
  return s;
}

}  // namespace

json offsets_to_json(const std::vector<Offset>& offsets) {
  json a = json::array();
  for (const auto& o : offsets) a.push_back({o.dx, o.dy});
  return a;
}

std::vector<Offset> offsets_from_json(const json& j) {
  std::vector<Offset> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2) throw std::invalid_argument("offset entries must be [dx, dy] pairs");
    out.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  return out;
}

void AppConfig::validate() const {
  pipeline.validate();
  if (model.classes != pipeline.classes || synthetic.classes != pipeline.classes) {
    throw std::invalid_argument("config: class counts disagree (pipeline " + std::to_string(pipeline.classes) +
                                ", model " + std::to_string(model.classes) + ", synthetic " +
                                std::to_string(synthetic.classes) + ")");
  }
  make_bank(model.kernel_size, model.offsets, model.learnable_bank);
  if (segmenter.kind != "oracle" && segmenter.kind != "toy") {
    throw std::invalid_argument("config: segmenter.kind must be 'oracle' or 'toy', got '" + segmenter.kind + "'");
  }
  if (optimizer.batch_size == 0 || optimizer.decay_every == 0) {
    throw std::invalid_argument("config: batch_size and decay_every must be >= 1");
  }
  if (training.intervals.empty()) throw std::invalid_argument("config: training.intervals is empty");
  if (!(training.intra_aux_weight >= 0)) throw std::invalid_argument("config: training.intra_aux_weight must be >= 0");
  if (bench.reps == 0) throw std::invalid_argument("config: bench.reps must be >= 1");
}

json to_json(const AppConfig& c) {
  json j;
  j["pipeline"] = {{"keyframe_interval", c.pipeline.keyframe_interval}, {"classes", c.pipeline.classes},
                   {"frame_height", c.pipeline.frame_height},           {"frame_width", c.pipeline.frame_width},
                   {"keyframe_scale", c.pipeline.keyframe_scale},       {"flow_input_scale", c.pipeline.flow_input_scale}};
  j["model"] = {{"classes", c.model.classes},         {"flow_width", c.model.flow_width},
                {"intra_width", c.model.intra_width}, {"guide_width", c.model.guide_width},
                {"kernel_size", c.model.kernel_size}, {"learnable_bank", c.model.learnable_bank},
                {"seed", c.model_seed}};
  if (c.model.offsets) j["model"]["offsets"] = offsets_to_json(*c.model.offsets);
  j["optimizer"] = {{"base_lr", c.optimizer.base_lr},           {"momentum", c.optimizer.momentum},
                    {"decay_factor", c.optimizer.decay_factor}, {"decay_every", c.optimizer.decay_every},
                    {"weight_decay", c.optimizer.weight_decay}, {"batch_size", c.optimizer.batch_size}};
  j["training"] = {{"intervals", c.training.intervals},
                   {"seed", c.training.seed},
                   {"crop_fraction", c.training.crop_fraction},
                   {"intra_aux_weight", c.training.intra_aux_weight},
                   {"mode", c.training.options.mode == PropagationMode::guided ? "guided" : "warp_only"}};
  const auto& s = c.synthetic;
  j["synthetic"] = {{"height", s.height},         {"width", s.width},           {"classes", s.classes},
                    {"min_shapes", s.min_shapes}, {"max_shapes", s.max_shapes}, {"max_speed", s.max_speed},
                    {"min_radius", s.min_radius}, {"max_radius", s.max_radius}, {"color_jitter", s.color_jitter},
                    {"pixel_noise", s.pixel_noise}};
  j["segmenter"] = {{"kind", c.segmenter.kind},
                    {"toy_width", c.segmenter.toy_width},
                    {"toy_iterations", c.segmenter.toy_iterations}};
  j["bench"] = {{"warmup", c.bench.warmup}, {"reps", c.bench.reps}};
  return j;
}

AppConfig config_from_json(const json& input) {
  if (!input.is_object()) throw std::invalid_argument("config: top level must be an object");
  json root = input;
  AppConfig c;
  try {
    json p = section(root, "pipeline");
    take(p, "keyframe_interval", c.pipeline.keyframe_interval);
    take(p, "classes", c.pipeline.classes);
    take(p, "frame_height", c.pipeline.frame_height);
    take(p, "frame_width", c.pipeline.frame_width);
    take(p, "keyframe_scale", c.pipeline.keyframe_scale);
    take(p, "flow_input_scale", c.pipeline.flow_input_scale);
    reject_unknown(p, "pipeline");

    json m = section(root, "model");
    c.model.classes = c.pipeline.classes;
    take(m, "classes", c.model.classes);
    take(m, "flow_width", c.model.flow_width);
    take(m, "intra_width", c.model.intra_width);
    take(m, "guide_width", c.model.guide_width);
    take(m, "kernel_size", c.model.kernel_size);
    take(m, "learnable_bank", c.model.learnable_bank);
    take(m, "seed", c.model_seed);
    if (auto it = m.find("offsets"); it != m.end()) {
      c.model.offsets = offsets_from_json(*it);
      m.erase(it);
    }
    reject_unknown(m, "model");

    json o = section(root, "optimizer");
    take(o, "base_lr", c.optimizer.base_lr);
    take(o, "momentum", c.optimizer.momentum);
    take(o, "decay_factor", c.optimizer.decay_factor);
    take(o, "decay_every", c.optimizer.decay_every);
    take(o, "weight_decay", c.optimizer.weight_decay);
    take(o, "batch_size", c.optimizer.batch_size);
    reject_unknown(o, "optimizer");

    json t = section(root, "training");
    take(t, "intervals", c.training.intervals);
    take(t, "seed", c.training.seed);
    take(t, "crop_fraction", c.training.crop_fraction);
    take(t, "intra_aux_weight", c.training.intra_aux_weight);
    std::string mode = "guided";
    take(t, "mode", mode);
    if (mode == "guided") {
      c.training.options.mode = PropagationMode::guided;
    } else if (mode == "warp_only") {
      c.training.options.mode = PropagationMode::warp_only;
    } else {
      throw std::invalid_argument("config: training.mode must be 'guided' or 'warp_only', got '" + mode + "'");
    }
    reject_unknown(t, "training");

    json s = section(root, "synthetic");
    c.synthetic.classes = c.pipeline.classes;
    c.synthetic.height = c.pipeline.frame_height;
    c.synthetic.width = c.pipeline.frame_width;
    take(s, "height", c.synthetic.height);
    take(s, "width", c.synthetic.width);
    take(s, "classes", c.synthetic.classes);
    take(s, "min_shapes", c.synthetic.min_shapes);
    take(s, "max_shapes", c.synthetic.max_shapes);
    take(s, "max_speed", c.synthetic.max_speed);
    take(s, "min_radius", c.synthetic.min_radius);
    take(s, "max_radius", c.synthetic.max_radius);
    take(s, "color_jitter", c.synthetic.color_jitter);
    take(s, "pixel_noise", c.synthetic.pixel_noise);
    reject_unknown(s, "synthetic");

    json g = section(root, "segmenter");
    take(g, "kind", c.segmenter.kind);
    take(g, "toy_width", c.segmenter.toy_width);
    take(g, "toy_iterations", c.segmenter.toy_iterations);
    reject_unknown(g, "segmenter");

    json b = section(root, "bench");
    take(b, "warmup", c.bench.warmup);
    take(b, "reps", c.bench.reps);
    reject_unknown(b, "bench");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  reject_unknown(root, "<root>");
  c.validate();
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const AppConfig& c) {
  write_file_atomic(path, to_json(c).dump(2) + "\n");
}

}  // namespace gsv
