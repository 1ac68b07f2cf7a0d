#pragma once

// Data-parallel inner loops behind retrieval and map scanning. Each kernel
// ships in two variants: a plain serial reference and an OpenMP version.
// The two must produce identical output bit for bit; tests and the bench
// target hold them against each other. Scores are computed sequentially
// per row in both variants, so floating-point results cannot diverge.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "himm/geometry.hpp"

namespace himm::kernels {

struct ScoredIndex {
    uint32_t index;
    float score;
};

// Dot product of `query` against every row of the n x dim matrix `data`.
void score_rows_serial(const float* data, size_t n, size_t dim,
                       const float* query, float* out);
void score_rows_parallel(const float* data, size_t n, size_t dim,
                         const float* query, float* out);

// Top-k rows by score, descending; ties broken by lower row index
// (insertion order). Returns fewer than k when n < k. Selection runs on
// the full score array, so variant choice only affects the scoring pass.
std::vector<ScoredIndex> select_topk(const float* scores, size_t n, size_t k);

std::vector<ScoredIndex> topk_serial(const float* data, size_t n, size_t dim,
                                     const float* query, size_t k);
std::vector<ScoredIndex> topk_parallel(const float* data, size_t n, size_t dim,
                                       const float* query, size_t k);
// Default entry point: parallel when OpenMP is enabled.
std::vector<ScoredIndex> topk(const float* data, size_t n, size_t dim,
                              const float* query, size_t k);

// Marks cells that are Free (state 1) and 4-adjacent to Unknown (state 0).
// `cells` is row-major width x height; out mask uses 1 for frontier cells.
void frontier_mask_serial(const uint8_t* cells, int width, int height, uint8_t* mask);
void frontier_mask_parallel(const uint8_t* cells, int width, int height, uint8_t* mask);
void frontier_mask(const uint8_t* cells, int width, int height, uint8_t* mask);

// Minimum Euclidean distance from each point to a polyline (segmentwise).
void polyline_distances_serial(const Vec2* points, size_t n,
                               const Vec2* verts, size_t n_verts, double* out);
void polyline_distances_parallel(const Vec2* points, size_t n,
                                 const Vec2* verts, size_t n_verts, double* out);
void polyline_distances(const Vec2* points, size_t n,
                        const Vec2* verts, size_t n_verts, double* out);

} // namespace himm::kernels
