#include "compass/sim/grid.hpp"

#include <cmath>
#include <deque>

#include "compass/common/errors.hpp"

namespace compass::sim {

OccupancyGrid::OccupancyGrid(const Map& map, const EmbodimentProfile& profile, double inflation, double cell_size)
    : OccupancyGrid(map, inflation, cell_size, &profile) {}

OccupancyGrid OccupancyGrid::all_blocking(const Map& map, double inflation, double cell_size) {
  return OccupancyGrid(map, inflation, cell_size, nullptr);
}

OccupancyGrid::OccupancyGrid(const Map& map, double inflation, double cell_size, const EmbodimentProfile* profile)
    : cell_(cell_size), inflation_(inflation) {
  if (!(cell_size > 0.0)) throw InvalidArgument("grid cell size must be positive");
  cols_ = static_cast<int>(std::ceil(map.width / cell_ - 1e-9));
  rows_ = static_cast<int>(std::ceil(map.height / cell_ - 1e-9));
  blocked_.assign(static_cast<std::size_t>(cols_) * rows_, 0);

  std::vector<const Obstacle*> blocking;
  for (const auto& o : map.obstacles)
    if (profile == nullptr || profile->blocked_by(o)) blocking.push_back(&o);

  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const auto [x, y] = center({c, r});
      bool b = x < inflation || y < inflation || x > map.width - inflation || y > map.height - inflation;
      for (std::size_t k = 0; !b && k < blocking.size(); ++k) b = distance_to_box(*blocking[k], x, y) <= inflation;
      blocked_[index({c, r})] = b ? 1 : 0;
    }
  }

  labels_.assign(blocked_.size(), -1);
  int next = 0;
  for (int start = 0; start < static_cast<int>(blocked_.size()); ++start) {
    if (blocked_[start] || labels_[start] >= 0) continue;
    std::deque<int> queue{start};
    labels_[start] = next;
    while (!queue.empty()) {
      const Cell cur = cell_at(queue.front());
      queue.pop_front();
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dc == 0 && dr == 0) || !can_move(cur, dc, dr)) continue;
          const int ni = index({cur.col + dc, cur.row + dr});
          if (labels_[ni] < 0) {
            labels_[ni] = next;
            queue.push_back(ni);
          }
        }
      }
    }
    ++next;
  }
}

Cell OccupancyGrid::cell_of(double x, double y) const {
  return {static_cast<int>(std::floor(x / cell_)), static_cast<int>(std::floor(y / cell_))};
}

std::pair<double, double> OccupancyGrid::center(Cell c) const {
  return {(c.col + 0.5) * cell_, (c.row + 0.5) * cell_};
}

bool OccupancyGrid::can_move(Cell from, int dc, int dr) const {
  const Cell to{from.col + dc, from.row + dr};
  if (blocked(to)) return false;
  if (dc != 0 && dr != 0) return !blocked({from.col + dc, from.row}) && !blocked({from.col, from.row + dr});
  return true;
}

const std::vector<int>& OccupancyGrid::components() const { return labels_; }

bool OccupancyGrid::connected(Cell a, Cell b) const {
  if (blocked(a) || blocked(b)) return false;
  return labels_[index(a)] == labels_[index(b)];
}

int OccupancyGrid::free_count() const {
  int n = 0;
  for (auto b : blocked_) n += b == 0;
  return n;
}

}  // namespace compass::sim
