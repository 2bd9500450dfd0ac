#include "stlsynth/env/environment.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "stlsynth/ad/scalar.hpp"

namespace stlsynth::env {

const char* kind_name(RegionKind k) {
  switch (k) {
    case RegionKind::kStart: return "start";
    case RegionKind::kCoverage: return "cov";
    case RegionKind::kObstacle: return "obs";
    case RegionKind::kGoal: return "goal";
    case RegionKind::kRoadBoundary: return "road";
  }
  return "?";
}

RegionKind kind_from_name(const std::string& name) {
  if (name == "start") return RegionKind::kStart;
  if (name == "cov" || name == "coverage") return RegionKind::kCoverage;
  if (name == "obs" || name == "obstacle") return RegionKind::kObstacle;
  if (name == "goal") return RegionKind::kGoal;
  if (name == "road" || name == "road-boundary") return RegionKind::kRoadBoundary;
  throw std::invalid_argument("unknown region kind '" + name + "'");
}

std::vector<const Region*> Environment::regions_of(RegionKind k) const {
  std::vector<const Region*> out;
  for (const Region& r : regions)
    if (r.kind == k) out.push_back(&r);
  return out;
}

nlohmann::json to_json(const Environment& e) {
  nlohmann::json regions = nlohmann::json::array();
  for (const Region& r : e.regions)
    regions.push_back({{"kind", kind_name(r.kind)}, {"cx", r.cx}, {"cy", r.cy}, {"r", r.radius}});
  nlohmann::json channels = nlohmann::json::array();
  for (RegionKind k : e.channel_order) channels.push_back(kind_name(k));
  return nlohmann::json{
      {"regions", regions},
      {"workspace", {e.workspace.xmin, e.workspace.xmax, e.workspace.ymin, e.workspace.ymax}},
      {"channels", channels}};
}

Environment environment_from_json(const nlohmann::json& j) {
  Environment e;
  const auto& ws = j.at("workspace");
  e.workspace = Workspace{ws.at(0).get<double>(), ws.at(1).get<double>(), ws.at(2).get<double>(),
                          ws.at(3).get<double>()};
  for (const auto& r : j.at("regions")) {
    Region region;
    region.kind = kind_from_name(r.at("kind").get<std::string>());
    region.cx = r.at("cx").get<double>();
    region.cy = r.at("cy").get<double>();
    region.radius = r.at("r").get<double>();
    if (!(region.radius > 0.0)) throw std::invalid_argument("region: radius must be positive");
    e.regions.push_back(region);
  }
  if (j.contains("channels")) {
    e.channel_order.clear();
    for (const auto& c : j.at("channels"))
      e.channel_order.push_back(kind_from_name(c.get<std::string>()));
  }
  return e;
}

EnvImage render(const Environment& e, int resolution) {
  if (resolution < 16) throw std::invalid_argument("render: resolution must be >= 16");
  const Workspace& ws = e.workspace;
  for (const Region& r : e.regions) {
    // Reject regions whose disc never meets the workspace rectangle.
    const double nx = std::clamp(r.cx, ws.xmin, ws.xmax);
    const double ny = std::clamp(r.cy, ws.ymin, ws.ymax);
    const double d = std::hypot(r.cx - nx, r.cy - ny);
    if (d > r.radius)
      throw std::invalid_argument(std::string("render: region '") + kind_name(r.kind) +
                                  "' lies outside the workspace");
  }
  EnvImage img;
  img.width = img.height = resolution;
  img.channels = static_cast<int>(e.channel_order.size());
  img.workspace = ws;
  img.data.assign(static_cast<std::size_t>(img.channels) * resolution * resolution, 0);
  std::size_t idx = 0;
  for (RegionKind kind : e.channel_order) {
    const auto regions = e.regions_of(kind);
    for (int py = 0; py < resolution; ++py) {
      const double wy = img.world_y(py);
      for (int px = 0; px < resolution; ++px, ++idx) {
        const double wx = img.world_x(px);
        for (const Region* r : regions) {
          const double dx = wx - r->cx, dy = wy - r->cy;
          if (dx * dx + dy * dy <= r->radius * r->radius) {
            img.data[idx] = 1;
            break;
          }
        }
      }
    }
  }
  return img;
}

void write_pgm(const EnvImage& img, int channel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (int py = img.height - 1; py >= 0; --py)
    for (int px = 0; px < img.width; ++px)
      out.put(img.at(channel, py, px) ? static_cast<char>(255) : static_cast<char>(0));
}

namespace {

// Signed distance to the nearest circle of a set: negative inside, zero on
// the boundary. Differentiable except at circle centers and equidistant
// ties, where the min2 fold picks the first region.
struct NearestRegionMu final : stl::Mu {
  std::vector<Region> regions;

  explicit NearestRegionMu(const std::vector<const Region*>& rs) {
    for (const Region* r : rs) regions.push_back(*r);
  }

  template <class S>
  auto dist(std::span<const S> state) const {
    auto sd = [&](const Region& r) {
      const S dx = add_imm(state[0], -r.cx);
      const S dy = add_imm(state[1], -r.cy);
      return add_imm(sqrt(square(dx) + square(dy)), -r.radius);
    };
    auto acc = sd(regions.front());
    for (std::size_t i = 1; i < regions.size(); ++i) acc = min2(acc, sd(regions[i]));
    return acc;
  }

  double eval(std::span<const double> state) const override { return dist(state); }
  ad::Var eval(std::span<const ad::Var> state) const override { return dist(state); }
};

}  // namespace

stl::PredicateLibrary bind_predicates(const Environment& e) {
  stl::PredicateLibrary lib;
  for (RegionKind kind : {RegionKind::kStart, RegionKind::kCoverage, RegionKind::kObstacle,
                          RegionKind::kGoal, RegionKind::kRoadBoundary}) {
    const auto regions = e.regions_of(kind);
    if (regions.empty()) continue;
    lib.add(kind_name(kind), std::make_shared<NearestRegionMu>(regions));
  }
  return lib;
}

stl::PredicateLibrary bicycle_channel_predicates() {
  stl::PredicateLibrary lib;
  lib.add("x", stl::channel_mu(0));
  lib.add("y", stl::channel_mu(1));
  lib.add("psi", stl::channel_mu(2));
  lib.add("V", stl::channel_mu(3));
  return lib;
}

}  // namespace stlsynth::env
