#include "himm/occupancy_grid.hpp"

#include <algorithm>

namespace himm {

GridIndex OccupancyGrid::grow_to_include(GridIndex c, int margin) {
    if (in_bounds(c)) return {0, 0};
    int lo_x = std::min(0, c.x - margin);
    int lo_y = std::min(0, c.y - margin);
    int hi_x = std::max(width_, c.x + 1 + margin);
    int hi_y = std::max(height_, c.y + 1 + margin);

    int new_w = hi_x - lo_x;
    int new_h = hi_y - lo_y;
    std::vector<uint8_t> grown(size_t(new_w) * size_t(new_h), uint8_t(CellState::Unknown));
    for (int y = 0; y < height_; ++y) {
        const uint8_t* src = cells_.data() + size_t(y) * width_;
        uint8_t* dst = grown.data() + size_t(y - lo_y) * new_w + (0 - lo_x);
        std::copy(src, src + width_, dst);
    }
    cells_ = std::move(grown);
    origin_.x += lo_x * resolution_;
    origin_.y += lo_y * resolution_;
    width_ = new_w;
    height_ = new_h;
    return {-lo_x, -lo_y};
}

} // namespace himm
