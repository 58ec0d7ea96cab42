#include "gsv/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gsv {

namespace {

constexpr std::string_view kHeader = "gsv-breakdown 1";

StageStats stats(const std::vector<double>& us) {
  StageStats s;
  if (us.empty()) return s;
  double sum = 0;
  for (double v : us) sum += v;
  const double mean = sum / static_cast<double>(us.size());
  double var = 0;
  for (double v : us) var += (v - mean) * (v - mean);
  s.mean_ms = mean / 1000.0;
  s.std_ms = std::sqrt(var / static_cast<double>(us.size())) / 1000.0;
  return s;
}

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw std::invalid_argument("report: bad number for " + key + ": '" + v + "'");
  return d;
}

const std::pair<const char*, StageStats BreakdownReport::*> kStages[] = {
    {"flow", &BreakdownReport::flow},       {"warp", &BreakdownReport::warp},
    {"feature", &BreakdownReport::feature}, {"fusion", &BreakdownReport::fusion},
    {"segment", &BreakdownReport::segment}, {"step", &BreakdownReport::step},
};

}  // namespace

std::string format_report(const BreakdownReport& r) {
  std::ostringstream os;
  os << kHeader << "\n";
  os << "interval=" << r.interval << "\n";
  os << "frames=" << r.frames << "\n";
  for (const auto& [name, member] : kStages) {
    os << name << "_mean_ms=" << real((r.*member).mean_ms) << "\n";
    os << name << "_std_ms=" << real((r.*member).std_ms) << "\n";
  }
  os << "fps_compute=" << real(r.fps_compute) << "\n";
  os << "fps_end_to_end=" << real(r.fps_end_to_end) << "\n";
  os << "per_distance_miou=";
  for (std::size_t i = 0; i < r.per_distance.size(); ++i) os << (i ? "," : "") << real(r.per_distance[i]);
  os << "\n";
  os << "average_miou=" << real(r.average_miou) << "\n";
  os << "minimum_miou=" << real(r.minimum_miou) << "\n";
  return os.str();
}

BreakdownReport parse_report(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != kHeader) {
    throw std::invalid_argument("report: expected header '" + std::string(kHeader) + "', got '" + line + "'");
  }
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("report: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("report: missing key " + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  BreakdownReport r;
  r.interval = std::stoul(take("interval"));
  r.frames = std::stoul(take("frames"));
  for (const auto& [name, member] : kStages) {
    (r.*member).mean_ms = parse_real(std::string(name) + "_mean_ms", take(std::string(name) + "_mean_ms"));
    (r.*member).std_ms = parse_real(std::string(name) + "_std_ms", take(std::string(name) + "_std_ms"));
  }
  r.fps_compute = parse_real("fps_compute", take("fps_compute"));
  r.fps_end_to_end = parse_real("fps_end_to_end", take("fps_end_to_end"));
  const std::string list = take("per_distance_miou");
  std::size_t pos = 0;
  while (pos < list.size()) {
    const auto comma = list.find(',', pos);
    const std::string item = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    r.per_distance.push_back(parse_real("per_distance_miou", item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  r.average_miou = parse_real("average_miou", take("average_miou"));
  r.minimum_miou = parse_real("minimum_miou", take("minimum_miou"));
  if (!kv.empty()) throw std::invalid_argument("report: unknown key " + kv.begin()->first);
  return r;
}

BreakdownReport bench(Pipeline& pipeline, const std::vector<RgbImage>& frames, std::size_t warmup, std::size_t reps) {
  if (reps == 0) throw std::invalid_argument("bench needs reps >= 1");
  if (frames.empty()) throw std::invalid_argument("bench needs at least one frame");
  using Clock = std::chrono::steady_clock;
  const auto& cfg = pipeline.config();

  pipeline.reset();
  for (std::size_t i = 0; i < warmup; ++i) pipeline.step(to_tensor(frames[i % frames.size()]), i % frames.size());
  pipeline.reset();

  std::vector<double> flow, warp, feature, fusion, segment, step;
  double compute_us = 0, e2e_us = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    pipeline.reset();
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto start = Clock::now();
      const Tensor frame = to_tensor(frames[i]);
      const auto res = pipeline.step(frame, i);
      const LabelMap labels = upsample_to_full(res.seg, cfg.frame_height, cfg.frame_width);
      e2e_us += std::chrono::duration<double, std::micro>(Clock::now() - start).count();
      (void)labels;
      const StageTimings& t = res.timings;
      compute_us += t.total_us;
      step.push_back(t.total_us);
      if (t.kind == FrameKind::keyframe) {
        segment.push_back(t.segment_us);
      } else {
        flow.push_back(t.flow_us);
        warp.push_back(t.warp_us);
        feature.push_back(t.feature_us);
        fusion.push_back(t.fusion_us);
      }
      ++n;
    }
  }
  BreakdownReport rep;
  rep.interval = cfg.keyframe_interval;
  rep.frames = n;
  rep.flow = stats(flow);
  rep.warp = stats(warp);
  rep.feature = stats(feature);
  rep.fusion = stats(fusion);
  rep.segment = stats(segment);
  rep.step = stats(step);
  rep.fps_compute = compute_us > 0 ? static_cast<double>(n) / (compute_us * 1e-6) : 0;
  rep.fps_end_to_end = e2e_us > 0 ? static_cast<double>(n) / (e2e_us * 1e-6) : 0;
  return rep;
}

}  // namespace gsv
