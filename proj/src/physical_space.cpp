#include "himm/physical_space.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include "himm/kernels.hpp"

namespace himm {

namespace {

// Amanatides-Woo voxel walk from a to b, in cell coordinates of `grid`.
// Visits the cell containing a first and the cell containing b last.
std::vector<GridIndex> traverse_ray(const OccupancyGrid& grid, Vec2 a, Vec2 b) {
    std::vector<GridIndex> visited;
    GridIndex cur = grid.world_to_cell(a);
    const GridIndex last = grid.world_to_cell(b);
    visited.push_back(cur);
    if (cur == last) return visited;

    const Vec2 d = b - a;
    const double res = grid.resolution();
    const int step_x = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
    const int step_y = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);

    auto boundary = [&](int cell, double o) {
        return o + cell * res; // world coord of the low edge of `cell`
    };
    const double inf = std::numeric_limits<double>::infinity();
    double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
    if (step_x != 0) {
        double edge = boundary(cur.x + (step_x > 0 ? 1 : 0), grid.origin().x);
        t_max_x = (edge - a.x) / d.x;
        t_delta_x = res / std::abs(d.x);
    }
    if (step_y != 0) {
        double edge = boundary(cur.y + (step_y > 0 ? 1 : 0), grid.origin().y);
        t_max_y = (edge - a.y) / d.y;
        t_delta_y = res / std::abs(d.y);
    }

    // The walk stops once the next crossing lies past b (t > 1). Without that
    // guard a 1-ulp disagreement between world_to_cell and the edge arithmetic
    // can make `cur` miss `last` sideways and march across the whole grid.
    const size_t max_steps = size_t(grid.width()) + size_t(grid.height()) + 4;
    for (size_t i = 0; i < max_steps; ++i) {
        if (std::min(t_max_x, t_max_y) > 1.0) break;
        if (t_max_x < t_max_y) {
            cur.x += step_x;
            t_max_x += t_delta_x;
        } else {
            cur.y += step_y;
            t_max_y += t_delta_y;
        }
        visited.push_back(cur);
        if (cur == last) break;
    }
    if (visited.back() != last) visited.push_back(last);
    return visited;
}

} // namespace

OccupancyGrid integrate_depth_scan(OccupancyGrid grid, const Pose& pose,
                                   const DepthScan& scan, double max_range) {
    const Vec2 start = pose.position.xy();
    if (!grid.contains_world(start))
        throw OutOfBoundsError("integrate_depth_scan: pose outside grid bounds");
    for (const ScanRay& r : scan) {
        if (!std::isfinite(r.range) || !std::isfinite(r.bearing))
            throw InvalidScanError("integrate_depth_scan: non-finite ray");
        if (r.range < 0.0 || r.range > max_range)
            throw InvalidScanError("integrate_depth_scan: range outside [0, max]");
    }

    // Grow once so every endpoint fits.
    for (const ScanRay& r : scan) {
        double ang = pose.yaw + r.bearing;
        Vec2 end{start.x + std::cos(ang) * r.range, start.y + std::sin(ang) * r.range};
        grid.grow_to_include(grid.world_to_cell(end));
    }

    // Pass 1: Free marks, pass 2: Occupied marks. Occupied wins within the scan.
    std::vector<GridIndex> free_marks;
    std::vector<GridIndex> occ_marks;
    free_marks.push_back(grid.world_to_cell(start)); // observer stands on Free
    for (const ScanRay& r : scan) {
        double ang = pose.yaw + r.bearing;
        Vec2 end{start.x + std::cos(ang) * r.range, start.y + std::sin(ang) * r.range};
        auto cells = traverse_ray(grid, start, end);
        for (size_t i = 0; i + 1 < cells.size(); ++i) free_marks.push_back(cells[i]);
        if (r.hit)
            occ_marks.push_back(cells.back());
        else
            free_marks.push_back(cells.back());
    }
    for (GridIndex c : free_marks)
        if (grid.in_bounds(c)) grid.set(c, CellState::Free);
    for (GridIndex c : occ_marks)
        if (grid.in_bounds(c)) grid.set(c, CellState::Occupied);
    return grid;
}

std::vector<Frontier> extract_frontiers(const OccupancyGrid& grid, int min_unknown_area) {
    const int w = grid.width(), h = grid.height();
    std::vector<uint8_t> mask(size_t(w) * h);
    kernels::frontier_mask(grid.raw().data(), w, h, mask.data());

    std::vector<Frontier> out;
    std::vector<uint8_t> seen(mask.size(), 0);
    std::deque<GridIndex> queue;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t idx = size_t(y) * w + x;
            if (!mask[idx] || seen[idx]) continue;
            Frontier f;
            seen[idx] = 1;
            queue.push_back({x, y});
            while (!queue.empty()) {
                GridIndex c = queue.front();
                queue.pop_front();
                f.cells.push_back(c);
                const GridIndex nbrs[4] = {
                    {c.x - 1, c.y}, {c.x + 1, c.y}, {c.x, c.y - 1}, {c.x, c.y + 1}};
                for (GridIndex n : nbrs) {
                    if (n.x < 0 || n.x >= w || n.y < 0 || n.y >= h) continue;
                    size_t ni = size_t(n.y) * w + n.x;
                    if (mask[ni] && !seen[ni]) {
                        seen[ni] = 1;
                        queue.push_back(n);
                    }
                }
            }
            f.size = int(f.cells.size());
            Vec2 acc{0.0, 0.0};
            for (GridIndex c : f.cells) acc = acc + grid.cell_center(c);
            f.centroid = acc * (1.0 / f.size);
            f.rho = compute_rho(grid, f, min_unknown_area);
            out.push_back(std::move(f));
        }
    }
    return out;
}

bool compute_rho(const OccupancyGrid& grid, const Frontier& frontier,
                 int min_unknown_area) {
    const int w = grid.width(), h = grid.height();
    std::vector<uint8_t> seen(size_t(w) * h, 0);
    std::deque<GridIndex> queue;
    auto push_unknown = [&](GridIndex c) {
        if (c.x < 0 || c.x >= w || c.y < 0 || c.y >= h) return;
        size_t i = size_t(c.y) * w + c.x;
        if (seen[i] || grid.raw()[i] != uint8_t(CellState::Unknown)) return;
        seen[i] = 1;
        queue.push_back(c);
    };
    for (GridIndex c : frontier.cells) {
        push_unknown({c.x - 1, c.y});
        push_unknown({c.x + 1, c.y});
        push_unknown({c.x, c.y - 1});
        push_unknown({c.x, c.y + 1});
    }
    int area = 0;
    while (!queue.empty()) {
        GridIndex c = queue.front();
        queue.pop_front();
        if (++area >= min_unknown_area) return true;
        push_unknown({c.x - 1, c.y});
        push_unknown({c.x + 1, c.y});
        push_unknown({c.x, c.y - 1});
        push_unknown({c.x, c.y + 1});
    }
    return area >= min_unknown_area;
}

AnnotatedExplorationMap render_retrieved_poses(OccupancyGrid grid,
                                               std::vector<Pose> poses, Pose agent,
                                               std::vector<Frontier> frontiers) {
    for (const Pose& p : poses)
        if (!finite(p)) throw ValidationError("render_retrieved_poses: non-finite pose");
    for (Frontier& f : frontiers) {
        double best = std::numeric_limits<double>::infinity();
        for (const Pose& p : poses)
            best = std::min(best, distance(f.centroid, p.position.xy()));
        f.dist_to_retrieved = best;
    }
    return AnnotatedExplorationMap{std::move(grid), std::move(poses),
                                   std::move(frontiers), agent};
}

std::vector<Frontier> prune_frontiers(const AnnotatedExplorationMap& map,
                                      bool explore, double d_min) {
    std::vector<Frontier> kept;
    for (const Frontier& f : map.frontiers) {
        if (explore ? f.rho : (f.dist_to_retrieved > d_min)) kept.push_back(f);
    }
    return kept;
}

namespace {
struct AStarNode {
    double f;
    double g;
    int idx;
    bool operator>(const AStarNode& o) const {
        if (f != o.f) return f > o.f;
        if (g != o.g) return g < o.g; // prefer deeper nodes on equal f
        return idx > o.idx;
    }
};
} // namespace

std::optional<PathResult> shortest_path(const OccupancyGrid& grid, const Pose& from,
                                        Vec2 to) {
    const GridIndex start = grid.world_to_cell(from.position.xy());
    if (!grid.in_bounds(start))
        throw OutOfBoundsError("shortest_path: start pose outside grid");
    const GridIndex goal = grid.world_to_cell(to);
    if (!grid.in_bounds(goal)) return std::nullopt;

    const int w = grid.width(), h = grid.height();
    auto flat = [&](GridIndex c) { return size_t(c.y) * w + c.x; };

    if (start == goal) return PathResult{{grid.cell_center(start)}, 0.0};
    if (grid.raw()[flat(goal)] != uint8_t(CellState::Free)) return std::nullopt;

    const double res = grid.resolution();
    const double kSqrt2 = std::sqrt(2.0);
    auto heuristic = [&](GridIndex c) {
        double dx = std::abs(c.x - goal.x), dy = std::abs(c.y - goal.y);
        return (std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy));
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(size_t(w) * h, inf);
    std::vector<int> prev(size_t(w) * h, -1);
    std::priority_queue<AStarNode, std::vector<AStarNode>, std::greater<AStarNode>> open;
    dist[flat(start)] = 0.0;
    open.push({heuristic(start), 0.0, int(flat(start))});

    static const int dx8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static const int dy8[8] = {0, 0, 1, -1, 1, -1, 1, -1};

    while (!open.empty()) {
        AStarNode node = open.top();
        open.pop();
        GridIndex c{node.idx % w, node.idx / w};
        if (node.g > dist[node.idx]) continue;
        if (c == goal) break;
        for (int k = 0; k < 8; ++k) {
            GridIndex n{c.x + dx8[k], c.y + dy8[k]};
            if (!grid.in_bounds(n)) continue;
            if (grid.raw()[flat(n)] != uint8_t(CellState::Free)) continue;
            double cost = node.g + (k < 4 ? 1.0 : kSqrt2);
            size_t ni = flat(n);
            if (cost < dist[ni]) {
                dist[ni] = cost;
                prev[ni] = node.idx;
                open.push({cost + heuristic(n), cost, int(ni)});
            }
        }
    }

    if (dist[flat(goal)] == inf) return std::nullopt;
    PathResult result;
    result.length = dist[flat(goal)] * res;
    std::vector<GridIndex> rev;
    for (int i = int(flat(goal)); i != -1; i = prev[i]) rev.push_back({i % w, i / w});
    for (auto it = rev.rbegin(); it != rev.rend(); ++it)
        result.waypoints.push_back(grid.cell_center(*it));
    return result;
}

std::optional<GridIndex> nearest_free_cell(const OccupancyGrid& grid, Vec2 p,
                                           int max_radius_cells) {
    GridIndex c0 = grid.world_to_cell(p);
    for (int r = 0; r <= max_radius_cells; ++r) {
        GridIndex best{};
        double best_d = std::numeric_limits<double>::infinity();
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
                GridIndex c{c0.x + dx, c0.y + dy};
                if (!grid.in_bounds(c)) continue;
                if (grid.raw()[size_t(c.y) * grid.width() + c.x] != uint8_t(CellState::Free))
                    continue;
                double d = distance(grid.cell_center(c), p);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
        }
        if (best_d < std::numeric_limits<double>::infinity()) return best;
    }
    return std::nullopt;
}

double compute_spl(bool success, double shortest_len, double actual_len) {
    if (shortest_len < 0.0 || actual_len < 0.0)
        throw ValidationError("compute_spl: negative length");
    if (!success) return 0.0;
    double den = std::max(actual_len, shortest_len);
    if (den == 0.0) return 1.0;
    return shortest_len / den;
}

} // namespace himm
