#include "compass/teacher/planner.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <queue>

#include "compass/common/errors.hpp"

namespace compass::teacher {

GridPath shortest_path(const OccupancyGrid& grid, Cell start, Cell goal) {
  if (grid.blocked(start) || grid.blocked(goal)) throw NoPathError("planner: start or goal cell is blocked");
  const int n = grid.cols() * grid.rows();
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int s = grid.index(start);
  const int g = grid.index(goal);
  dist[static_cast<std::size_t>(s)] = 0.0;
  open.push({0.0, s});
  while (!open.empty()) {
    const auto [d, i] = open.top();
    open.pop();
    if (d > dist[static_cast<std::size_t>(i)]) continue;
    if (i == g) break;
    const Cell c = grid.cell_at(i);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if ((dc == 0 && dr == 0) || !grid.can_move(c, dc, dr)) continue;
        const int j = grid.index({c.col + dc, c.row + dr});
        const double nd = d + (dc != 0 && dr != 0 ? std::numbers::sqrt2 : 1.0);
        if (nd < dist[static_cast<std::size_t>(j)]) {
          dist[static_cast<std::size_t>(j)] = nd;
          parent[static_cast<std::size_t>(j)] = i;
          open.push({nd, j});
        }
      }
    }
  }
  if (!std::isfinite(dist[static_cast<std::size_t>(g)])) throw NoPathError("planner: goal unreachable");
  GridPath path;
  path.cost_cells = dist[static_cast<std::size_t>(g)];
  path.cost_m = path.cost_cells * grid.cell_size();
  for (int i = g; i != -1; i = parent[static_cast<std::size_t>(i)]) path.cells.push_back(grid.cell_at(i));
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

bool line_of_sight(const OccupancyGrid& grid, Cell a, Cell b) {
  // Walks the cells crossed by the centre-to-centre segment in unit cell
  // coordinates; a crossing through a corner counts as a diagonal move.
  int col = a.col;
  int row = a.row;
  const int dc = b.col - a.col;
  const int dr = b.row - a.row;
  const int sc = dc > 0 ? 1 : (dc < 0 ? -1 : 0);
  const int sr = dr > 0 ? 1 : (dr < 0 ? -1 : 0);
  const int nc = std::abs(dc);
  const int nr = std::abs(dr);
  if (grid.blocked(a)) return false;
  // Scaled by 2*nc*nr to keep the traversal in integers.
  long long tc = nr;  // next column boundary at parameter (2k+1)/(2nc), scaled by 2 nc nr
  long long tr = nc;
  const long long step_c = 2LL * nr;
  const long long step_r = 2LL * nc;
  int ic = 0;
  int ir = 0;
  while (ic < nc || ir < nr) {
    if (ic < nc && (ir >= nr || tc < tr)) {
      if (!grid.can_move({col, row}, sc, 0)) return false;
      col += sc;
      tc += step_c;
      ++ic;
    } else if (ir < nr && (ic >= nc || tr < tc)) {
      if (!grid.can_move({col, row}, 0, sr)) return false;
      row += sr;
      tr += step_r;
      ++ir;
    } else {
      if (!grid.can_move({col, row}, sc, sr)) return false;
      col += sc;
      row += sr;
      tc += step_c;
      tr += step_r;
      ++ic;
      ++ir;
    }
  }
  return true;
}

std::vector<Cell> smooth_path(const OccupancyGrid& grid, const std::vector<Cell>& cells) {
  if (cells.size() <= 2) return cells;
  std::vector<Cell> out{cells.front()};
  std::size_t anchor = 0;
  while (anchor + 1 < cells.size()) {
    std::size_t next = anchor + 1;
    for (std::size_t j = cells.size() - 1; j > anchor + 1; --j) {
      if (line_of_sight(grid, cells[anchor], cells[j])) {
        next = j;
        break;
      }
    }
    out.push_back(cells[next]);
    anchor = next;
  }
  return out;
}

Cell nearest_free(const OccupancyGrid& grid, Cell c) {
  c.col = std::clamp(c.col, 0, grid.cols() - 1);
  c.row = std::clamp(c.row, 0, grid.rows() - 1);
  if (!grid.blocked(c)) return c;
  std::vector<char> seen(static_cast<std::size_t>(grid.cols() * grid.rows()), 0);
  std::deque<Cell> queue{c};
  seen[static_cast<std::size_t>(grid.index(c))] = 1;
  while (!queue.empty()) {
    const Cell cur = queue.front();
    queue.pop_front();
    if (!grid.blocked(cur)) return cur;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const Cell n{cur.col + dc, cur.row + dr};
        if (!grid.inside(n)) continue;
        auto& s = seen[static_cast<std::size_t>(grid.index(n))];
        if (!s) {
          s = 1;
          queue.push_back(n);
        }
      }
  }
  throw NoPathError("planner: grid has no free cell");
}

PlannedPath plan_path(const OccupancyGrid& grid, Point start, Point goal) {
  const Cell s = nearest_free(grid, grid.cell_of(start.x, start.y));
  const Cell g = nearest_free(grid, grid.cell_of(goal.x, goal.y));
  PlannedPath out;
  out.raw = shortest_path(grid, s, g);
  if (s == g) {
    out.waypoints = {goal};
    return out;
  }
  for (const Cell& c : smooth_path(grid, out.raw.cells)) {
    const auto [x, y] = grid.center(c);
    out.waypoints.push_back({x, y});
  }
  out.waypoints.back() = goal;
  return out;
}

double polyline_length(const std::vector<Point>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  return len;
}

}  // namespace compass::teacher
