#pragma once

// Versioned structured-text snapshots for every store, plus map export.
// Serialization is canonical: saving a freshly loaded snapshot reproduces
// the file byte for byte. Bodies carry an fnv checksum; loaders refuse
// corrupt or truncated files (IntegrityError) and foreign versions
// (MigrationError).

#include <string>
#include <vector>

#include "himm/episodic_memory.hpp"
#include "himm/physical_space.hpp"
#include "himm/semantic_memory.hpp"

namespace himm {

// Row-major run-length cell text, runs of U (unknown), F (free),
// O (occupied), e.g. "12U5F3O".
std::string encode_cells_rle(const OccupancyGrid& grid);
std::vector<uint8_t> decode_cells_rle(const std::string& rle, size_t expected);

void save_semantic(const SemanticStore& store, const std::string& path);
SemanticStore load_semantic(const std::string& path);

void save_rules(const RuleStore& store, const std::string& path);
RuleStore load_rules(const std::string& path);

void save_episode_record(const EpisodeRecord& record, const std::string& path);
EpisodeRecord load_episode_record(const std::string& path);

// Directory layout: an index file (episodes.idx) naming one snapshot file
// per episode in storage order.
void save_episodic(const EpisodicStore& store, const std::string& dir);
EpisodicStore load_episodic(const std::string& dir);

struct MemoryStores {
    EpisodicStore episodic;
    RuleStore rules;
};

// Writes both stores plus a manifest of per-file checksums; returns the
// manifest path. load_memory verifies every checksum before parsing.
std::string snapshot_memory(const EpisodicStore& episodic, const RuleStore& rules,
                            const std::string& dir);
MemoryStores load_memory(const std::string& dir);

// Grayscale occupancy image: Unknown 128, Free 255, Occupied 0. Binary
// selects P5, otherwise ASCII P2. Top image row = highest y (north up).
void save_map_pgm(const OccupancyGrid& grid, const std::string& path,
                  bool binary = true);

// Map snapshot with the overlays: grid geometry plus run-length cells,
// agent pose, retrieved poses, frontier cell lists.
void save_annotated_map(const AnnotatedExplorationMap& map, const std::string& path);
AnnotatedExplorationMap load_annotated_map(const std::string& path);

// One finished episode's distillation inputs: the reasoning log plus the
// script's ground truth.
struct EpisodeTrace {
    ReasoningLog log;
    GroundTruthTrajectory gt;
    std::string gt_answer;
};

void save_trace(const EpisodeTrace& trace, const std::string& path);
EpisodeTrace load_trace(const std::string& path);

} // namespace himm
