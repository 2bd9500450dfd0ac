#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stlsynth/core/rng.hpp"
#include "stlsynth/stl/formula.hpp"

namespace stlsynth::env {

enum class RegionKind : std::uint8_t { kStart, kCoverage, kObstacle, kGoal, kRoadBoundary };

const char* kind_name(RegionKind k);
RegionKind kind_from_name(const std::string& name);

/// Circular region. Road-boundary regions use a large radius so the circle
/// boundary approximates a lane edge for rendering; their predicates are
/// bound as exact half-planes by the spec builders.
struct Region {
  RegionKind kind;
  double cx = 0.0, cy = 0.0;
  double radius = 1.0;
};

struct Workspace {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

/// Parametric region layout plus the channel order its images are rendered
/// in. Immutable once constructed.
struct Environment {
  std::vector<Region> regions;
  Workspace workspace;
  std::vector<RegionKind> channel_order{RegionKind::kStart, RegionKind::kCoverage,
                                        RegionKind::kObstacle, RegionKind::kGoal};

  std::vector<const Region*> regions_of(RegionKind k) const;
  bool has(RegionKind k) const { return !regions_of(k).empty(); }
};

nlohmann::json to_json(const Environment& e);
Environment environment_from_json(const nlohmann::json& j);

/// Multi-channel binary raster of an Environment. Pixel (px, py) is 1 iff
/// its center lies inside some region of the channel's kind; py = 0 is the
/// ymin row.
struct EnvImage {
  int width = 0, height = 0, channels = 0;
  Workspace workspace;
  std::vector<std::uint8_t> data;  // [c][py][px]

  std::uint8_t at(int c, int py, int px) const {
    return data[static_cast<std::size_t>((c * height + py) * width + px)];
  }
  double world_x(int px) const { return workspace.xmin + (px + 0.5) * workspace.width() / width; }
  double world_y(int py) const { return workspace.ymin + (py + 0.5) * workspace.height() / height; }
};

/// Deterministic binary rendering. Throws if resolution < 16 or a region is
/// entirely outside the workspace.
EnvImage render(const Environment& e, int resolution);

/// One channel as a PGM (for eyeballing); rows written top-down.
void write_pgm(const EnvImage& img, int channel, const std::string& path);

/// Signed-distance predicates for the region kinds present in the
/// environment: mu(state) = dist((x, y), center) - radius, negative inside,
/// with multiple regions of one kind combining as the nearest. Names follow
/// kind_name(): "start", "cov", "obs", "goal", "road".
stl::PredicateLibrary bind_predicates(const Environment& e);

/// State-channel predicates for the bicycle state (x, y, psi, V).
stl::PredicateLibrary bicycle_channel_predicates();

}  // namespace stlsynth::env
