#include "gsv/model_store.hpp"

#include <map>
#include <set>
#include <sstream>

#include "gsv/config.hpp"
#include "gsv/io.hpp"

namespace gsv {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "gsv-model";

json shape_json(const Shape& s) { return {s.stack, s.channels, s.height, s.width}; }

Shape shape_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ModelStoreError("tensor shape must have four entries");
  return Shape{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>(), j[3].get<std::size_t>()};
}

/// Flattened key/value view for readable diffs.
void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j.dump();
  }
}

std::string diff(const json& stored, const json& expected) {
  std::map<std::string, std::string> a, b;
  flatten(stored, "", a);
  flatten(expected, "", b);
  std::ostringstream os;
  for (const auto& [k, v] : b) {
    auto it = a.find(k);
    if (it == a.end()) {
      os << "  " << k << ": missing in checkpoint (expected " << v << ")\n";
    } else if (it->second != v) {
      os << "  " << k << ": checkpoint " << it->second << ", expected " << v << "\n";
    }
  }
  for (const auto& [k, v] : a) {
    if (!b.count(k)) os << "  " << k << ": unexpected " << v << "\n";
  }
  return os.str();
}

ModelConfig config_from_architecture(const json& a) {
  ModelConfig c;
  c.classes = a.at("classes").get<std::size_t>();
  c.flow_width = a.at("flow_width").get<std::size_t>();
  c.intra_width = a.at("intra_width").get<std::size_t>();
  c.guide_width = a.at("guide_width").get<std::size_t>();
  c.kernel_size = a.at("kernel_size").get<std::size_t>();
  c.learnable_bank = a.at("learnable_bank").get<bool>();
  c.offsets = offsets_from_json(a.at("offsets"));
  return c;
}

}  // namespace

json architecture_json(const ModelConfig& config) {
  const KernelBank bank = make_bank(config.kernel_size, config.offsets, config.learnable_bank);
  return {{"classes", config.classes},
          {"flow_width", config.flow_width},
          {"intra_width", config.intra_width},
          {"guide_width", config.guide_width},
          {"kernel_size", config.kernel_size},
          {"learnable_bank", config.learnable_bank},
          {"offsets", offsets_to_json(bank.offsets)},
          {"hffb_dilations", kHffbDilations},
          {"laplacian", "4-neighbour"},
          {"guidance_order", "bank offsets, intra last"}};
}

void save_checkpoint(const std::filesystem::path& dir, PropagationModels& models, const OptimizerState& optimizer,
                     ToySegmenterParams* segmenter) {
  std::string blob;
  json tensors = json::array();
  auto put = [&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", shape_json(t.shape())}, {"offset", blob.size()}});
    for (Real v : t.data()) put_f32(blob, static_cast<float>(v));
  };
  ModelConfig cfg = models.config;
  cfg.offsets = models.bank.offsets;
  for (const auto& p : models.parameters()) put(p.name, *p.tensor);
  if (!models.bank.learnable) put("bank.kernels", models.bank.kernels);
  for (const auto& p : models.parameters()) {
    auto it = optimizer.velocity.find(p.name);
    if (it != optimizer.velocity.end()) put("velocity/" + p.name, it->second);
  }
  json seg = nullptr;
  if (segmenter) {
    for (const auto& p : segmenter->parameters()) put(p.name, *p.tensor);
    seg = {{"width", segmenter->layers[0].out_channels()}, {"classes", segmenter->layers[3].out_channels()}};
  }
  const auto& o = optimizer.config;
  json manifest = {
      {"format", kFormat},
      {"version", kModelFormatVersion},
      {"real", "float32-le"},
      {"architecture", architecture_json(cfg)},
      {"iteration", optimizer.iteration},
      {"optimizer",
       {{"base_lr", o.base_lr}, {"momentum", o.momentum}, {"decay_factor", o.decay_factor},
        {"decay_every", o.decay_every}, {"weight_decay", o.weight_decay}, {"batch_size", o.batch_size}}},
      {"segmenter", seg},
      {"tensors", tensors},
      {"blob_bytes", blob.size()},
  };
  write_file_atomic(dir / "tensors.bin", blob);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::optional<ModelConfig>& expected) {
  const auto manifest_path = dir / "manifest.json";
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ModelStoreError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  try {
    if (m.value("format", "") != kFormat) {
      throw ModelStoreError(manifest_path.string() + ": not a model manifest (format '" + m.value("format", "") + "')");
    }
    const int version = m.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelStoreError(manifest_path.string() + ": unsupported model format version " + std::to_string(version));
    }
    const json& arch = m.at("architecture");
    if (expected) {
      ModelConfig e = *expected;
      const json want = architecture_json(e);
      if (arch != want) {
        throw ModelStoreError(manifest_path.string() + ": architecture mismatch\n" + diff(arch, want));
      }
    }
    const std::string blob = read_file(dir / "tensors.bin");
    if (blob.size() != m.at("blob_bytes").get<std::size_t>()) {
      throw ModelStoreError((dir / "tensors.bin").string() + ": " + std::to_string(blob.size()) +
                            " bytes, manifest says " + m.at("blob_bytes").dump());
    }

    Checkpoint ck;
    ModelConfig cfg = config_from_architecture(arch);
    ck.models = make_models(cfg, 0);
    ck.optimizer.iteration = m.at("iteration").get<std::uint64_t>();
    const json& o = m.at("optimizer");
    ck.optimizer.config = {o.at("base_lr").get<double>(),      o.at("momentum").get<double>(),
                           o.at("decay_factor").get<double>(), o.at("decay_every").get<std::uint64_t>(),
                           o.at("weight_decay").get<double>(), o.at("batch_size").get<std::size_t>()};
    if (!m.at("segmenter").is_null()) {
      Rng rng(0);
      ck.segmenter = make_toy_segmenter(m["segmenter"].at("width").get<std::size_t>(),
                                        m["segmenter"].at("classes").get<std::size_t>(), rng);
    }

    std::map<std::string, Tensor*> slots;
    for (const auto& p : ck.models.parameters()) slots[p.name] = p.tensor;
    slots["bank.kernels"] = &ck.models.bank.kernels;
    if (ck.segmenter) {
      for (const auto& p : ck.segmenter->parameters()) slots[p.name] = p.tensor;
    }
    std::set<std::string> seen;
    std::size_t expected_offset = 0;
    for (const auto& t : m.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      const Shape shape = shape_from(t.at("shape"));
      const std::size_t offset = t.at("offset").get<std::size_t>();
      if (offset != expected_offset || offset + shape.elements() * 4 > blob.size()) {
        throw ModelStoreError(manifest_path.string() + ": tensor " + name + " at byte " + std::to_string(offset) +
                              " does not fit the blob layout");
      }
      expected_offset = offset + shape.elements() * 4;
      Tensor value(shape);
      for (std::size_t i = 0; i < value.size(); ++i) value[i] = static_cast<Real>(get_f32(blob, offset + 4 * i));
      if (name.rfind("velocity/", 0) == 0) {
        ck.optimizer.velocity[name.substr(9)] = std::move(value);
        continue;
      }
      auto it = slots.find(name);
      if (it == slots.end()) throw ModelStoreError(manifest_path.string() + ": unexpected tensor " + name);
      if (!(it->second->shape() == shape)) {
        throw ModelStoreError(manifest_path.string() + ": tensor " + name + " has shape " + shape.str() +
                              ", architecture requires " + it->second->shape().str());
      }
      *it->second = std::move(value);
      seen.insert(name);
    }
    if (expected_offset != blob.size()) throw ModelStoreError(manifest_path.string() + ": trailing bytes in tensor blob");
    for (const auto& [name, _] : slots) {
      if (!seen.count(name)) throw ModelStoreError(manifest_path.string() + ": missing tensor " + name);
    }
    return ck;
  } catch (const json::exception& e) {
    throw ModelStoreError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace gsv
