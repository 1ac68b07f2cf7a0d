#pragma once

#include <cstdint>
#include <vector>

#include "himm/errors.hpp"
#include "himm/geometry.hpp"

namespace himm {

enum class CellState : uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct GridIndex {
    int x = 0;
    int y = 0;
    bool operator==(const GridIndex&) const = default;
};

// Row-major 2D exploration map. Value-semantic: copy freely, mutate your
// own copy. Cell (0,0) spans [origin, origin + resolution) on both axes.
class OccupancyGrid {
public:
    OccupancyGrid() : OccupancyGrid(0.1, {0.0, 0.0}, 1, 1) {}
    OccupancyGrid(double resolution, Vec2 origin, int width, int height)
        : resolution_(resolution), origin_(origin), width_(width), height_(height),
          cells_(size_t(width) * size_t(height), uint8_t(CellState::Unknown)) {
        if (resolution <= 0.0) throw ConfigError("grid resolution must be > 0");
        if (width < 1 || height < 1) throw ConfigError("grid dimensions must be >= 1");
    }

    double resolution() const { return resolution_; }
    Vec2 origin() const { return origin_; }
    int width() const { return width_; }
    int height() const { return height_; }

    bool in_bounds(GridIndex c) const {
        return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
    }

    CellState at(GridIndex c) const {
        if (!in_bounds(c)) throw OutOfBoundsError("cell index out of bounds");
        return CellState(cells_[size_t(c.y) * width_ + c.x]);
    }

    void set(GridIndex c, CellState s) {
        if (!in_bounds(c)) throw OutOfBoundsError("cell index out of bounds");
        cells_[size_t(c.y) * width_ + c.x] = uint8_t(s);
    }

    GridIndex world_to_cell(Vec2 p) const {
        return {int(std::floor((p.x - origin_.x) / resolution_)),
                int(std::floor((p.y - origin_.y) / resolution_))};
    }

    Vec2 cell_center(GridIndex c) const {
        return {origin_.x + (c.x + 0.5) * resolution_, origin_.y + (c.y + 0.5) * resolution_};
    }

    bool contains_world(Vec2 p) const { return in_bounds(world_to_cell(p)); }

    // Raw row-major states, layout-compatible with the scan kernels.
    const std::vector<uint8_t>& raw() const { return cells_; }

    size_t known_count() const {
        size_t n = 0;
        for (uint8_t c : cells_)
            if (c != uint8_t(CellState::Unknown)) ++n;
        return n;
    }

    // Expands the grid so that `c` (in current cell coordinates) fits,
    // padding by `margin` cells. Existing cells keep their world positions;
    // the returned offset is what got added on the low side.
    GridIndex grow_to_include(GridIndex c, int margin = 8);

private:
    double resolution_;
    Vec2 origin_;
    int width_;
    int height_;
    std::vector<uint8_t> cells_;
};

} // namespace himm
