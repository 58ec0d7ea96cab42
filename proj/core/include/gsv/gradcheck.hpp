#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsv {

struct GradcheckEntry {
  std::string op;
  bool differentiable = true;
  double max_rel_error = 0;  // norm-wise over sampled coordinates, worst input
  std::size_t coordinates = 0;
  std::size_t skipped = 0;  // probes whose stencil straddled a kink
  bool passed = true;
  std::string note;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double seconds = 0;
  double tolerance = 0;

  bool passed() const;
  /// One line per entry: `op,status,max_rel_error,coordinates,skipped`.
  std::string to_text() const;
};

/// Central finite differences (step `eps`) against the recorded adjoints for
/// every differentiable primitive, each network, and the composed
/// non-keyframe step with a cross-entropy loss. Outputs are reduced with a
/// random projection; up to `samples` coordinates are compared per input.
GradcheckReport gradcheck_all(std::uint64_t seed, double eps = 1e-5, double tolerance = 1e-4, std::size_t samples = 12);

}  // namespace gsv
