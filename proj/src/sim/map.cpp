#include "compass/sim/map.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "compass/common/errors.hpp"
#include "compass/common/hash.hpp"
#include "compass/common/rng.hpp"
#include "compass/sim/grid.hpp"

namespace compass::sim {

namespace {

constexpr int kGenerationAttempts = 64;
constexpr double kMaxTier1AreaFraction = 0.15;
constexpr double kMinLargestComponent = 0.80;
constexpr double kValidationInflation = 0.35;

void add_perimeter(Map& m) {
  const double t = kWallThickness / 2.0;
  m.obstacles.push_back({m.width / 2, t, m.width / 2, t, 0.0});
  m.obstacles.push_back({m.width / 2, m.height - t, m.width / 2, t, 0.0});
  m.obstacles.push_back({t, m.height / 2, t, m.height / 2 - 2 * t, 0.0});
  m.obstacles.push_back({m.width - t, m.height / 2, t, m.height / 2 - 2 * t, 0.0});
}

void add_boxes(Map& m, Rng& rng, int count, double min_half, double max_half) {
  for (int i = 0; i < count; ++i) {
    const double hx = rng.uniform(min_half, max_half);
    const double hy = rng.uniform(min_half, max_half);
    const double cx = rng.uniform(1.5, m.width - 1.5);
    const double cy = rng.uniform(1.5, m.height - 1.5);
    m.obstacles.push_back({cx, cy, hx, hy, 0.0});
  }
}

/// Segment [lo, hi] along one axis with gaps (door centers, door width) cut out.
std::vector<std::pair<double, double>> cut_doors(double lo, double hi, std::vector<std::pair<double, double>> doors) {
  std::sort(doors.begin(), doors.end());
  std::vector<std::pair<double, double>> out;
  double cursor = lo;
  for (const auto& [center, width] : doors) {
    const double a = center - width / 2;
    if (a > cursor + 0.05) out.emplace_back(cursor, a);
    cursor = std::max(cursor, center + width / 2);
  }
  if (hi > cursor + 0.05) out.emplace_back(cursor, hi);
  return out;
}

void add_vertical_wall(Map& m, double x, double y0, double y1, const std::vector<std::pair<double, double>>& doors) {
  for (const auto& [a, b] : cut_doors(y0, y1, doors))
    m.obstacles.push_back({x, (a + b) / 2, kWallThickness / 2, (b - a) / 2, 0.0});
}

void add_horizontal_wall(Map& m, double y, double x0, double x1, const std::vector<std::pair<double, double>>& doors) {
  for (const auto& [a, b] : cut_doors(x0, x1, doors))
    m.obstacles.push_back({(a + b) / 2, y, (b - a) / 2, kWallThickness / 2, 0.0});
}

/// Rack rows inside [x0,x1] x [y0,y1], running along x. Returns the number of overhangs placed.
int add_racks(Map& m, Rng& rng, int count, double x0, double x1, double y0, double y1, bool force_overhang) {
  int overhangs = 0;
  const int forced = force_overhang ? static_cast<int>(rng.index(count)) : -1;
  const double band = (y1 - y0) / count;
  for (int i = 0; i < count; ++i) {
    const double span = x1 - x0;
    const double length = rng.uniform(std::min(4.0, 0.5 * span), std::min(9.0, 0.8 * span));
    const double cx = rng.uniform(x0 + length / 2, x1 - length / 2);
    const double cy = y0 + band * (i + 0.5) + rng.uniform(-0.2, 0.2) * band;
    const bool overhang = i == forced || rng.uniform() < 0.4;
    overhangs += overhang;
    m.obstacles.push_back({cx, cy, length / 2, 0.4, overhang ? kOverhangClearance : 0.0});
  }
  return overhangs;
}

Map candidate(int tier, std::uint64_t seed, int attempt) {
  Rng rng{seed, static_cast<std::uint64_t>(tier), static_cast<std::uint64_t>(attempt), fnv1a("map")};
  Map m;
  m.tier = tier;
  m.seed = seed;
  add_perimeter(m);
  const double W = m.width;
  const double H = m.height;
  const bool transpose = rng.uniform() < 0.5;
  switch (tier) {
    case 1:
      add_boxes(m, rng, 8 + static_cast<int>(rng.index(7)), 0.2, 0.75);
      break;
    case 2:
      add_racks(m, rng, 3 + static_cast<int>(rng.index(3)), 1.5, W - 1.5, 2.0, H - 2.0, true);
      add_boxes(m, rng, 2 + static_cast<int>(rng.index(3)), 0.2, 0.5);
      break;
    case 3: {
      const double xw = rng.uniform(8.0, 12.0);
      const double yw = rng.uniform(8.0, 12.0);
      auto door = [&](double lo, double hi) { return std::pair{rng.uniform(lo, hi), rng.uniform(1.4, 2.0)}; };
      add_vertical_wall(m, xw, kWallThickness, H - kWallThickness, {door(2.0, yw - 2.5), door(yw + 2.5, H - 2.0)});
      add_horizontal_wall(m, yw, kWallThickness, xw - 0.1, {door(2.0, xw - 2.5)});
      add_horizontal_wall(m, yw, xw + 0.1, W - kWallThickness, {door(xw + 2.5, W - 2.0)});
      add_boxes(m, rng, 4 + static_cast<int>(rng.index(4)), 0.25, 0.6);
      break;
    }
    case 4: {
      const double xw = rng.uniform(8.0, 12.0);
      auto door = [&](double lo, double hi) { return std::pair{rng.uniform(lo, hi), rng.uniform(1.4, 2.0)}; };
      add_vertical_wall(m, xw, kWallThickness, H - kWallThickness, {door(2.0, 8.0), door(12.0, H - 2.0)});
      int overhangs = add_racks(m, rng, 2 + static_cast<int>(rng.index(2)), 1.0, xw - 1.0, 2.0, H - 2.0, true);
      overhangs += add_racks(m, rng, 2 + static_cast<int>(rng.index(2)), xw + 1.0, W - 1.0, 2.0, H - 2.0, false);
      (void)overhangs;
      add_boxes(m, rng, 2 + static_cast<int>(rng.index(3)), 0.25, 0.5);
      break;
    }
    default:
      throw InvalidArgument("tier must be 1..4");
  }
  if (transpose) {
    for (auto& o : m.obstacles) {
      std::swap(o.cx, o.cy);
      std::swap(o.half_x, o.half_y);
    }
  }
  return m;
}

bool valid(const Map& m) {
  for (const auto& o : m.obstacles) {
    if (o.cx - o.half_x < -1e-9 || o.cy - o.half_y < -1e-9 || o.cx + o.half_x > m.width + 1e-9 ||
        o.cy + o.half_y > m.height + 1e-9)
      return false;
  }
  if (m.tier == 1 && obstacle_area_fraction(m) > kMaxTier1AreaFraction) return false;
  const auto grid = OccupancyGrid::all_blocking(m, kValidationInflation);
  const int free = grid.free_count();
  if (free == 0) return false;
  std::vector<int> sizes;
  for (int label : grid.components()) {
    if (label < 0) continue;
    if (label >= static_cast<int>(sizes.size())) sizes.resize(label + 1, 0);
    ++sizes[label];
  }
  const int largest = *std::max_element(sizes.begin(), sizes.end());
  return largest >= kMinLargestComponent * free;
}

}  // namespace

Map generate_map(int tier, std::uint64_t seed) {
  if (tier < 1 || tier > 4) throw InvalidArgument("tier must be 1..4, got " + std::to_string(tier));
  for (int attempt = 0; attempt < kGenerationAttempts; ++attempt) {
    Map m = candidate(tier, seed, attempt);
    if (valid(m)) return m;
  }
  throw GenerationError("no valid tier-" + std::to_string(tier) + " map for seed " + std::to_string(seed));
}

Map empty_map(double width, double height) {
  Map m;
  m.width = width;
  m.height = height;
  return m;
}

double distance_to_box(const Obstacle& o, double x, double y) {
  const double dx = std::max(std::abs(x - o.cx) - o.half_x, 0.0);
  const double dy = std::max(std::abs(y - o.cy) - o.half_y, 0.0);
  return std::hypot(dx, dy);
}

double obstacle_area_fraction(const Map& map) {
  double area = 0.0;
  for (const auto& o : map.obstacles) area += 4.0 * o.half_x * o.half_y;
  return area / (map.width * map.height);
}

nlohmann::json map_to_json(const Map& map) {
  auto obstacles = nlohmann::json::array();
  for (const auto& o : map.obstacles)
    obstacles.push_back({{"cx", o.cx}, {"cy", o.cy}, {"half_x", o.half_x}, {"half_y", o.half_y},
                         {"clearance", o.clearance}});
  return {{"bounds", {map.width, map.height}}, {"tier", map.tier}, {"seed", map.seed}, {"obstacles", obstacles}};
}

Map map_from_json(const nlohmann::json& j) {
  try {
    Map m;
    m.width = j.at("bounds").at(0).get<double>();
    m.height = j.at("bounds").at(1).get<double>();
    m.tier = j.at("tier").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& o : j.at("obstacles"))
      m.obstacles.push_back({o.at("cx").get<double>(), o.at("cy").get<double>(), o.at("half_x").get<double>(),
                             o.at("half_y").get<double>(), o.at("clearance").get<double>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed map JSON: ") + e.what());
  }
}

void save_map(const std::filesystem::path& path, const Map& map) { write_file(path, map_to_json(map).dump(2) + "\n"); }

Map load_map(const std::filesystem::path& path) { return map_from_json(nlohmann::json::parse(read_file(path))); }

}  // namespace compass::sim
