#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace compass::sim {

/// Axis-aligned box. clearance == 0 means solid from the ground; a positive
/// clearance is an overhang that robots shorter than it can pass under.
struct Obstacle {
  double cx = 0.0;
  double cy = 0.0;
  double half_x = 0.0;
  double half_y = 0.0;
  double clearance = 0.0;

  bool operator==(const Obstacle&) const = default;
};

struct Map {
  double width = 20.0;
  double height = 20.0;
  std::vector<Obstacle> obstacles;
  int tier = 1;
  std::uint64_t seed = 0;

  bool operator==(const Map&) const = default;
};

inline constexpr double kOverhangClearance = 1.5;
inline constexpr double kWallThickness = 0.2;

/// Procedural map for tier 1 (sparse low boxes), 2 (rack rows, some of them
/// overhangs), 3 (office rooms with doorways) or 4 (rooms plus racks).
/// Deterministic in (tier, seed). Throws InvalidArgument for a bad tier and
/// GenerationError when no valid layout is found within the retry budget.
Map generate_map(int tier, std::uint64_t seed);

/// Empty bounded map without perimeter walls.
Map empty_map(double width = 20.0, double height = 20.0);

/// Distance from a point to a box (0 inside).
double distance_to_box(const Obstacle& o, double x, double y);

/// Fraction of the map area covered by obstacle footprints (overlaps counted twice).
double obstacle_area_fraction(const Map& map);

nlohmann::json map_to_json(const Map& map);
Map map_from_json(const nlohmann::json& j);
void save_map(const std::filesystem::path& path, const Map& map);
Map load_map(const std::filesystem::path& path);

}  // namespace compass::sim
