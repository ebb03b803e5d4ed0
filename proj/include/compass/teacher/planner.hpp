#pragma once

#include <utility>
#include <vector>

#include "compass/sim/grid.hpp"

namespace compass::teacher {

using sim::Cell;
using sim::OccupancyGrid;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 8-connected Dijkstra with unit/sqrt(2) step costs (scaled by the cell size
/// in `cost_m`). Equal-cost frontier entries are expanded in increasing cell
/// index order. Throws NoPathError when goal is unreachable or either end is blocked.
struct GridPath {
  std::vector<Cell> cells;
  double cost_cells = 0.0;
  double cost_m = 0.0;
};
GridPath shortest_path(const OccupancyGrid& grid, Cell start, Cell goal);

/// True when the straight segment between the two cell centres only touches
/// free cells, with diagonal crossings requiring both side cells free.
bool line_of_sight(const OccupancyGrid& grid, Cell a, Cell b);

/// Greedy string pulling: keeps the farthest visible cell from each anchor.
std::vector<Cell> smooth_path(const OccupancyGrid& grid, const std::vector<Cell>& cells);

struct PlannedPath {
  std::vector<Point> waypoints;
  GridPath raw;
};

/// Plans from a world start to a world goal. Blocked endpoints are snapped to
/// the nearest free cell first. Waypoints are smoothed cell centres with the
/// last one replaced by the exact goal; start and goal in one cell give a
/// single waypoint.
PlannedPath plan_path(const OccupancyGrid& grid, Point start, Point goal);

/// Closest free cell by breadth-first search (grid order breaks ties).
Cell nearest_free(const OccupancyGrid& grid, Cell c);

double polyline_length(const std::vector<Point>& pts);

}  // namespace compass::teacher
