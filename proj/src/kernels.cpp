#include "himm/kernels.hpp"

#include <algorithm>
#include <queue>

namespace himm::kernels {

namespace {
inline float row_dot(const float* row, const float* query, size_t dim) {
    float acc = 0.0f;
    for (size_t j = 0; j < dim; ++j) acc += row[j] * query[j];
    return acc;
}

// true when a ranks ahead of b
inline bool ranks_before(const ScoredIndex& a, const ScoredIndex& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
}
} // namespace

void score_rows_serial(const float* data, size_t n, size_t dim,
                       const float* query, float* out) {
    for (size_t i = 0; i < n; ++i) out[i] = row_dot(data + i * dim, query, dim);
}

void score_rows_parallel(const float* data, size_t n, size_t dim,
                         const float* query, float* out) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)n; ++i)
        out[i] = row_dot(data + size_t(i) * dim, query, dim);
}

std::vector<ScoredIndex> select_topk(const float* scores, size_t n, size_t k) {
    k = std::min(k, n);
    if (k == 0) return {};
    // min-heap on the ranking order: worst kept element on top
    auto worse = [](const ScoredIndex& a, const ScoredIndex& b) { return ranks_before(a, b); };
    std::priority_queue<ScoredIndex, std::vector<ScoredIndex>, decltype(worse)> heap(worse);
    for (size_t i = 0; i < n; ++i) {
        ScoredIndex cand{uint32_t(i), scores[i]};
        if (heap.size() < k) {
            heap.push(cand);
        } else if (ranks_before(cand, heap.top())) {
            heap.pop();
            heap.push(cand);
        }
    }
    std::vector<ScoredIndex> out(heap.size());
    for (size_t i = heap.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

std::vector<ScoredIndex> topk_serial(const float* data, size_t n, size_t dim,
                                     const float* query, size_t k) {
    std::vector<float> scores(n);
    score_rows_serial(data, n, dim, query, scores.data());
    return select_topk(scores.data(), n, k);
}

std::vector<ScoredIndex> topk_parallel(const float* data, size_t n, size_t dim,
                                       const float* query, size_t k) {
    std::vector<float> scores(n);
    score_rows_parallel(data, n, dim, query, scores.data());
    return select_topk(scores.data(), n, k);
}

std::vector<ScoredIndex> topk(const float* data, size_t n, size_t dim,
                              const float* query, size_t k) {
#ifdef _OPENMP
    return topk_parallel(data, n, dim, query, k);
#else
    return topk_serial(data, n, dim, query, k);
#endif
}

namespace {
inline uint8_t frontier_cell(const uint8_t* cells, int width, int height, int x, int y) {
    if (cells[size_t(y) * width + x] != 1) return 0; // Free only
    if (x > 0 && cells[size_t(y) * width + x - 1] == 0) return 1;
    if (x + 1 < width && cells[size_t(y) * width + x + 1] == 0) return 1;
    if (y > 0 && cells[size_t(y - 1) * width + x] == 0) return 1;
    if (y + 1 < height && cells[size_t(y + 1) * width + x] == 0) return 1;
    return 0;
}
} // namespace

void frontier_mask_serial(const uint8_t* cells, int width, int height, uint8_t* mask) {
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask[size_t(y) * width + x] = frontier_cell(cells, width, height, x, y);
}

void frontier_mask_parallel(const uint8_t* cells, int width, int height, uint8_t* mask) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask[size_t(y) * width + x] = frontier_cell(cells, width, height, x, y);
}

void frontier_mask(const uint8_t* cells, int width, int height, uint8_t* mask) {
#ifdef _OPENMP
    frontier_mask_parallel(cells, width, height, mask);
#else
    frontier_mask_serial(cells, width, height, mask);
#endif
}

namespace {
inline double min_dist_to_polyline(const Vec2& p, const Vec2* verts, size_t n_verts) {
    double best = distance(p, verts[0]);
    for (size_t s = 1; s < n_verts; ++s)
        best = std::min(best, point_segment_distance(p, verts[s - 1], verts[s]));
    return best;
}
} // namespace

void polyline_distances_serial(const Vec2* points, size_t n,
                               const Vec2* verts, size_t n_verts, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = min_dist_to_polyline(points[i], verts, n_verts);
}

void polyline_distances_parallel(const Vec2* points, size_t n,
                                 const Vec2* verts, size_t n_verts, double* out) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < (long long)n; ++i)
        out[i] = min_dist_to_polyline(points[i], verts, n_verts);
}

void polyline_distances(const Vec2* points, size_t n,
                        const Vec2* verts, size_t n_verts, double* out) {
#ifdef _OPENMP
    polyline_distances_parallel(points, n, verts, n_verts, out);
#else
    polyline_distances_serial(points, n, verts, n_verts, out);
#endif
}

} // namespace himm::kernels
