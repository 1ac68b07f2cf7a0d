#pragma once

// The physical half of the memory engine: depth-scan integration,
// frontier extraction and pruning, retrieved-pose rendering, grid path
// planning, and the path-efficiency metric.

#include <limits>
#include <optional>
#include <vector>

#include "himm/occupancy_grid.hpp"

namespace himm {

inline constexpr double kDefaultResolution = 0.1;  // meters per cell
inline constexpr double kDefaultMaxRange = 5.0;    // meters
inline constexpr int kDefaultMinUnknownArea = 10;  // cells
inline constexpr double kDefaultDMin = 1.5;        // meters

struct ScanRay {
    double bearing = 0.0; // radians, relative to the observer's yaw
    double range = 0.0;   // meters
    bool hit = false;     // true when the ray ended on an obstacle
};

using DepthScan = std::vector<ScanRay>;

// A maximal 4-connected component of Free cells that touch Unknown.
struct Frontier {
    std::vector<GridIndex> cells; // row-major discovery order
    Vec2 centroid;                // world coords, mean of member cell centers
    int size = 0;
    bool rho = false; // leads to a big enough unexplored region
    double dist_to_retrieved = std::numeric_limits<double>::infinity();
};

struct AnnotatedExplorationMap {
    OccupancyGrid grid;
    std::vector<Pose> retrieved_poses;
    std::vector<Frontier> frontiers;
    Pose agent_pose;
};

// Marks cells along each ray Free and the terminal cell Occupied when the
// ray hit. Occupied marks win over Free within one scan; cells no ray
// touches keep their state. The observer's own cell is always marked Free.
// Rays reaching past the current bounds grow the grid. Throws
// OutOfBoundsError when the pose is outside the grid and InvalidScanError
// on non-finite, negative, or over-range ranges.
OccupancyGrid integrate_depth_scan(OccupancyGrid grid, const Pose& pose,
                                   const DepthScan& scan,
                                   double max_range = kDefaultMaxRange);

// All maximal 4-connected components of {Free cells 4-adjacent to Unknown},
// in row-major order of their first cell. Populates centroid, size, rho.
std::vector<Frontier> extract_frontiers(const OccupancyGrid& grid,
                                        int min_unknown_area = kDefaultMinUnknownArea);

// True iff the Unknown region reachable from the frontier's Unknown
// neighbors holds at least min_unknown_area cells.
bool compute_rho(const OccupancyGrid& grid, const Frontier& frontier,
                 int min_unknown_area);

// Composes the annotated map and fills in each frontier's distance to the
// nearest retrieved pose (infinity when there are none).
AnnotatedExplorationMap render_retrieved_poses(OccupancyGrid grid,
                                               std::vector<Pose> poses, Pose agent,
                                               std::vector<Frontier> frontiers);

// Keeps frontiers that lead to unexplored space when exploring, otherwise
// frontiers strictly farther than d_min from every retrieved pose.
std::vector<Frontier> prune_frontiers(const AnnotatedExplorationMap& map,
                                      bool explore, double d_min);

struct PathResult {
    std::vector<Vec2> waypoints; // cell centers, first = start cell
    double length = 0.0;         // meters
};

// Minimum-cost 8-connected route through Free cells, diagonals cost
// sqrt(2) cells. Returns nullopt when the target is Occupied, Unknown, or
// unreachable. The start pose must lie inside the grid.
std::optional<PathResult> shortest_path(const OccupancyGrid& grid, const Pose& from,
                                        Vec2 to);

// Nearest Free cell to a world point (4-connected ring search), if any.
std::optional<GridIndex> nearest_free_cell(const OccupancyGrid& grid, Vec2 p,
                                           int max_radius_cells = 20);

// Success weighted by path length: 0 on failure, otherwise
// shortest / max(actual, shortest), with the degenerate zero-length
// success counting as 1.
double compute_spl(bool success, double shortest_len, double actual_len);

} // namespace himm
