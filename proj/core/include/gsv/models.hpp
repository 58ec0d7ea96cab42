#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gsv/flow_net.hpp"
#include "gsv/guided_fusion.hpp"
#include "gsv/intra_net.hpp"
#include "gsv/spatial.hpp"

namespace gsv {

struct ModelConfig {
  std::size_t classes = 4;
  std::size_t flow_width = 32;
  std::size_t intra_width = 32;
  std::size_t guide_width = 32;
  std::size_t kernel_size = 3;
  std::optional<std::vector<Offset>> offsets;
  bool learnable_bank = false;
};

/// Everything trained end-to-end for non-keyframe propagation.
struct PropagationModels {
  ModelConfig config;
  FlowNetParams flow;
  IntraNetParams intra;
  GuideNetParams guide;
  KernelBank bank;

  /// Stable order: flow, intra, guide, then the bank kernels when learnable.
  ParamList parameters();
};

PropagationModels make_models(const ModelConfig& config, std::uint64_t seed);

}  // namespace gsv
