#include "gsv/models.hpp"

namespace gsv {

ParamList PropagationModels::parameters() {
  ParamList out = flow.parameters();
  for (auto& p : intra.parameters()) out.push_back(p);
  for (auto& p : guide.parameters()) out.push_back(p);
  if (bank.learnable) out.push_back({"bank.kernels", &bank.kernels, false});
  return out;
}

PropagationModels make_models(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  PropagationModels m;
  m.config = config;
  m.bank = make_bank(config.kernel_size, config.offsets, config.learnable_bank);
  m.flow = make_flow_net(config.flow_width, rng);
  m.intra = make_intra_net(config.intra_width, config.classes, rng);
  m.guide = make_guide_net(config.classes, m.bank.size() + 1, config.guide_width, rng);
  return m;
}

}  // namespace gsv
