#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "compass/sim/map.hpp"
#include "compass/sim/profile.hpp"

namespace compass::sim {

struct Cell {
  int col = 0;
  int row = 0;
  bool operator==(const Cell&) const = default;
};

/// Occupancy grid over the map bounds. A cell is blocked when its center lies
/// within `inflation` of an obstacle that blocks the profile, or of the map edge.
class OccupancyGrid {
 public:
  OccupancyGrid(const Map& map, const EmbodimentProfile& profile, double inflation, double cell_size = 0.25);
  /// Grid where every obstacle blocks, regardless of clearance.
  static OccupancyGrid all_blocking(const Map& map, double inflation, double cell_size = 0.25);

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double cell_size() const { return cell_; }
  double inflation() const { return inflation_; }
  int index(Cell c) const { return c.row * cols_ + c.col; }
  Cell cell_at(int index) const { return {index % cols_, index / cols_}; }
  bool inside(Cell c) const { return c.col >= 0 && c.row >= 0 && c.col < cols_ && c.row < rows_; }
  bool blocked(Cell c) const { return !inside(c) || blocked_[index(c)] != 0; }
  Cell cell_of(double x, double y) const;
  std::pair<double, double> center(Cell c) const;

  /// Whether an 8-connected move from `from` by (dc, dr) is allowed: target free
  /// and, for diagonals, both orthogonal neighbours free.
  bool can_move(Cell from, int dc, int dr) const;

  /// Connected-component label per cell (-1 for blocked cells).
  const std::vector<int>& components() const;
  bool connected(Cell a, Cell b) const;
  int free_count() const;

 private:
  OccupancyGrid(const Map& map, double inflation, double cell_size, const EmbodimentProfile* profile);

  int cols_ = 0;
  int rows_ = 0;
  double cell_ = 0.25;
  double inflation_ = 0.0;
  std::vector<std::uint8_t> blocked_;
  std::vector<int> labels_;
};

}  // namespace compass::sim
