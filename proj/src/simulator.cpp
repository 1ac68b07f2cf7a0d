#include "himm/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "himm/prompts.hpp"
#include "himm/text_format.hpp"

namespace himm {

namespace {

constexpr double kWallPullback = 0.02; // meters kept clear of a hit wall

std::string fixed3(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << v;
    return os.str();
}

} // namespace

const char* modality_name(QuestionModality m) {
    switch (m) {
        case QuestionModality::Category: return "category";
        case QuestionModality::Description: return "description";
        case QuestionModality::Image: return "image";
    }
    return "description";
}

static std::optional<QuestionModality> parse_modality(const std::string& s) {
    for (QuestionModality m : {QuestionModality::Category, QuestionModality::Description,
                               QuestionModality::Image})
        if (s == modality_name(m)) return m;
    return std::nullopt;
}

std::pair<Vec2, Vec2> scene_bounds(const SceneSpec& scene) {
    if (scene.walls.empty()) throw ValidationError("scene has no walls");
    Vec2 lo = scene.walls.front().a;
    Vec2 hi = lo;
    for (const Wall& w : scene.walls) {
        for (const Vec2& p : {w.a, w.b}) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
        }
    }
    return {lo, hi};
}

void validate_scene(const SceneSpec& scene, const std::vector<std::string>& vocabulary) {
    if (scene.name.empty()) throw ValidationError("scene needs a name");
    const auto [lo, hi] = scene_bounds(scene);
    for (const Wall& w : scene.walls) {
        if (!finite(w.a) || !finite(w.b))
            throw ValidationError("non-finite wall in scene " + scene.name);
        const bool vertical = w.a.x == w.b.x;
        const bool horizontal = w.a.y == w.b.y;
        if (vertical == horizontal) // both -> degenerate point, neither -> slanted
            throw ValidationError("wall must be axis-aligned and non-degenerate");
    }
    if (scene.spawns.empty()) throw ValidationError("scene needs at least one spawn");
    for (const Pose& p : scene.spawns)
        if (!finite(p)) throw ValidationError("non-finite spawn pose");
    for (const SceneObject& o : scene.objects) {
        if (o.category.empty()) throw ValidationError("object without category");
        if (!finite(o.position) || !finite(o.extents))
            throw ValidationError("non-finite object in scene " + scene.name);
        if (o.position.x < lo.x || o.position.x > hi.x || o.position.y < lo.y ||
            o.position.y > hi.y)
            throw ValidationError("object " + o.category + " outside scene bounds");
        if (!vocabulary.empty() &&
            std::find(vocabulary.begin(), vocabulary.end(), o.category) ==
                vocabulary.end())
            throw ValidationError("object category not in vocabulary: " + o.category);
    }
}

Vec2 target_position(const EpisodeScript& script, const SceneSpec& scene) {
    const Vec2 end = script.gt_trajectory.waypoints.empty()
                         ? Vec2{}
                         : script.gt_trajectory.waypoints.back();
    const SceneObject* best = nullptr;
    double best_d = 0.0;
    for (const SceneObject& o : scene.objects) {
        if (o.category != script.target_category) continue;
        const double d = distance(o.position.xy(), end);
        if (!best || d < best_d) {
            best = &o;
            best_d = d;
        }
    }
    if (!best)
        throw ValidationError("target category not present in scene: " +
                              script.target_category);
    return best->position.xy();
}

void validate_script(const EpisodeScript& script, const SceneSpec& scene) {
    if (script.question.empty()) throw ValidationError("script needs a question");
    if (script.gt_answer.empty()) throw ValidationError("script needs a gt answer");
    validate_trajectory(script.gt_trajectory);
    const std::vector<Vec2>& wp = script.gt_trajectory.waypoints;

    bool at_spawn = false;
    for (const Pose& s : scene.spawns)
        if (distance(s.position.xy(), wp.front()) <= 1e-6) at_spawn = true;
    if (!at_spawn)
        throw ValidationError("trajectory must start at a spawn pose");

    const Vec2 target = target_position(script, scene);
    if (distance(wp.back(), target) > 1.0)
        throw ValidationError("trajectory must end within 1 m of the target");

    for (size_t i = 1; i < wp.size(); ++i) {
        const Vec2 d = wp[i] - wp[i - 1];
        for (const Wall& w : scene.walls) {
            const auto t = segment_intersection_t(wp[i - 1], d, w.a, w.b);
            // Endpoints resting on a wall line (door thresholds) are fine.
            if (t && *t > 1e-9 && *t < 1.0 - 1e-9)
                throw ValidationError("trajectory crosses a wall");
        }
    }
}

SyntheticEmbedder::SyntheticEmbedder(std::vector<std::string> vocabulary, size_t dim,
                                     uint64_t seed, double sigma)
    : dim_(dim), seed_(seed), sigma_(sigma), vocab_(std::move(vocabulary)) {
    if (dim == 0) throw ConfigError("embedder dimension must be >= 1");
    if (sigma < 0.0) throw ConfigError("noise scale must be >= 0");
}

std::vector<float> SyntheticEmbedder::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    if (std::find(vocab_.begin(), vocab_.end(), text) != vocab_.end())
        return base_vector(text);
    return hash_to_unit_vector(seed_, "text:" + text, dim_);
}

std::vector<float> SyntheticEmbedder::base_vector(const std::string& category) const {
    return hash_to_unit_vector(seed_, "category:" + category, dim_);
}

std::vector<float> SyntheticEmbedder::area_vector(const std::string& scene_name) const {
    return hash_to_unit_vector(seed_, "area:" + scene_name, dim_);
}

std::vector<float> SyntheticEmbedder::view_embedding(const std::string& category,
                                                     const Pose& pose) const {
    std::ostringstream key;
    key << "view:" << category << ":" << std::llround(pose.position.x * 1e6) << ","
        << std::llround(pose.position.y * 1e6) << "," << std::llround(pose.position.z * 1e6)
        << "," << std::llround(pose.yaw * 1e6);
    const std::vector<float> noise =
        hash_to_unit_vector(seed_ ^ 0x517cc1b727220a95ULL, key.str(), dim_);
    std::vector<float> v = base_vector(category);
    for (size_t i = 0; i < dim_; ++i) v[i] += float(sigma_) * noise[i];
    normalize_in_place(v);
    return v;
}

std::pair<Observation, DepthScan> observe(const SceneSpec& scene, const Pose& pose,
                                          const SyntheticEmbedder& embedder,
                                          const SensorParams& params) {
    const auto [lo, hi] = scene_bounds(scene);
    const Vec2 eye = pose.position.xy();
    if (eye.x < lo.x || eye.x > hi.x || eye.y < lo.y || eye.y > hi.y)
        throw OutOfBoundsError("observe: pose outside the scene");
    if (params.rays < 1 || params.fov <= 0.0 || params.max_range <= 0.0)
        throw ConfigError("observe: malformed sensor parameters");

    DepthScan scan;
    scan.reserve(size_t(params.rays));
    for (int i = 0; i < params.rays; ++i) {
        const double bearing =
            params.rays == 1
                ? 0.0
                : -params.fov / 2.0 + params.fov * double(i) / (params.rays - 1);
        const double angle = pose.yaw + bearing;
        const Vec2 d{std::cos(angle) * params.max_range,
                     std::sin(angle) * params.max_range};
        double best_t = 2.0;
        for (const Wall& w : scene.walls) {
            const auto t = segment_intersection_t(eye, d, w.a, w.b);
            if (t && *t < best_t) best_t = *t;
        }
        if (best_t <= 1.0)
            scan.push_back({bearing, best_t * params.max_range, true});
        else
            scan.push_back({bearing, params.max_range, false});
    }

    Observation obs;
    obs.pose = pose;
    obs.image_ref = "img://" + scene.name + "/" + fixed3(pose.position.x) + "_" +
                    fixed3(pose.position.y) + "_" + fixed3(pose.yaw);
    for (const SceneObject& o : scene.objects) {
        const Vec2 to_obj = o.position.xy() - eye;
        const double dist = to_obj.norm();
        if (dist > params.max_range) continue;
        if (dist > 1e-9) {
            const double off = normalize_yaw(std::atan2(to_obj.y, to_obj.x) - pose.yaw);
            if (std::abs(off) > params.fov / 2.0 + 1e-12) continue;
        }
        bool occluded = false;
        for (const Wall& w : scene.walls) {
            const auto t = segment_intersection_t(eye, to_obj, w.a, w.b);
            if (t && *t < 1.0 - 1e-9) {
                occluded = true;
                break;
            }
        }
        if (occluded) continue;
        obs.regions.push_back(
            {embedder.view_embedding(o.category, pose), {o.position, o.extents},
             o.category});
    }
    if (obs.regions.empty()) {
        obs.global_embedding = embedder.area_vector(scene.name);
    } else {
        std::vector<float> mean(embedder.dim(), 0.0f);
        for (const RegionEntry& r : obs.regions)
            for (size_t i = 0; i < mean.size(); ++i) mean[i] += r.embedding[i];
        normalize_in_place(mean);
        obs.global_embedding = std::move(mean);
    }
    return {std::move(obs), std::move(scan)};
}

MoveOutcome execute_move(const SceneSpec& scene, const Pose& from, Vec2 waypoint) {
    const Vec2 p0 = from.position.xy();
    const Vec2 d = waypoint - p0;
    const double len = d.norm();
    if (len < 1e-12) return {from, 0.0, false};

    double best_t = 2.0;
    for (const Wall& w : scene.walls) {
        const auto t = segment_intersection_t(p0, d, w.a, w.b);
        if (t && *t < best_t) best_t = *t;
    }
    double travel = len;
    bool collided = false;
    if (best_t <= 1.0) {
        travel = std::max(0.0, best_t * len - kWallPullback);
        collided = true;
    }
    const Vec2 dir{d.x / len, d.y / len};
    Pose out = from;
    out.position.x = p0.x + dir.x * travel;
    out.position.y = p0.y + dir.y * travel;
    out.yaw = normalize_yaw(std::atan2(d.y, d.x));
    return {out, travel, collided};
}

namespace {

std::string normalize_answer(const std::string& s) {
    std::string out;
    bool space_pending = false;
    for (char raw : s) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            if (space_pending && !out.empty()) out.push_back(' ');
            space_pending = false;
            out.push_back(char(std::tolower(c)));
        } else {
            space_pending = true;
        }
    }
    return out;
}

} // namespace

JudgeOutcome judge_answer(const EpisodeScript& script, const std::string& answer,
                          ChatClient* judge) {
    if (!judge) {
        const std::string got = normalize_answer(answer);
        const std::string want = normalize_answer(script.gt_answer);
        if (got.empty() || want.empty()) return {false, false};
        return {got == want || got.find(want) != std::string::npos, false};
    }
    ChatRequest req;
    req.system = prompts::kJudgeSystem;
    req.schema = ReplySchema::YesNo;
    req.tags = {"judge"};
    req.turns.push_back({"user",
                         "Question: " + script.question + "\nReference answer: " +
                             script.gt_answer + "\nProposed answer: " + answer +
                             "\nDo they mean the same thing? Answer yes or no.",
                         {}});
    try {
        return {complete(*judge, req).yes, false};
    } catch (const Error&) {
        return {false, true};
    }
}

OccupancyGrid rasterize_scene(const SceneSpec& scene, double resolution) {
    const auto [lo, hi] = scene_bounds(scene);
    const int margin = 2;
    const int width = int(std::ceil((hi.x - lo.x) / resolution)) + 2 * margin;
    const int height = int(std::ceil((hi.y - lo.y) / resolution)) + 2 * margin;
    OccupancyGrid grid(resolution,
                       {lo.x - margin * resolution, lo.y - margin * resolution}, width,
                       height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) grid.set({x, y}, CellState::Free);
    for (const Wall& w : scene.walls) {
        const double len = distance(w.a, w.b);
        const int n = std::max(1, int(std::ceil(len / (resolution / 4.0))));
        for (int i = 0; i <= n; ++i) {
            const double t = double(i) / n;
            const Vec2 p = w.a + (w.b - w.a) * t;
            const GridIndex c = grid.world_to_cell(p);
            if (grid.in_bounds(c)) grid.set(c, CellState::Occupied);
        }
    }
    return grid;
}

double gt_shortest_length(const SceneSpec& scene, Vec2 start, Vec2 target,
                          double resolution) {
    const OccupancyGrid grid = rasterize_scene(scene, resolution);
    const auto start_cell = nearest_free_cell(grid, start);
    const auto target_cell = nearest_free_cell(grid, target);
    if (start_cell && target_cell) {
        const Pose from = Pose::at(grid.cell_center(*start_cell).x,
                                   grid.cell_center(*start_cell).y);
        if (const auto path = shortest_path(grid, from, grid.cell_center(*target_cell)))
            return path->length;
    }
    return distance(start, target);
}

SimEnvironment::SimEnvironment(SceneSpec scene, EpisodeScript script,
                               const SyntheticEmbedder& embedder, ChatClient* judge,
                               SensorParams params)
    : scene_(std::move(scene)),
      script_(std::move(script)),
      embedder_(embedder),
      judge_(judge),
      params_(params) {
    validate_scene(scene_, {});
    validate_script(script_, scene_);
    const std::vector<Vec2>& wp = script_.gt_trajectory.waypoints;
    const Vec2 head = wp[1] - wp[0];
    pose_ = Pose::at(wp[0].x, wp[0].y, std::atan2(head.y, head.x));
    target_ = himm::target_position(script_, scene_);
    shortest_ = gt_shortest_length(scene_, wp[0], target_, kDefaultResolution);
}

std::pair<Observation, DepthScan> SimEnvironment::observe() {
    return himm::observe(scene_, pose_, embedder_, params_);
}

MoveOutcome SimEnvironment::move_to(Vec2 waypoint) {
    const MoveOutcome out = execute_move(scene_, pose_, waypoint);
    pose_ = out.pose;
    collided_ = collided_ || out.collided;
    return out;
}

JudgeOutcome SimEnvironment::judge(const std::string& answer) {
    return judge_answer(script_, answer, judge_);
}

// --- files ---------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

void check_header(const std::vector<std::string>& lines, const std::string& magic,
                  const std::string& path) {
    if (lines.empty()) throw IoError("empty file: " + path);
    const auto head = text::split_tokens(lines.front());
    if (head.size() != 2 || head[0] != magic)
        throw IoError(path + " is not a " + magic + " file");
    if (head[1] != "v1")
        throw MigrationError(path + ": unsupported " + magic + " version " + head[1]);
}

double tok_d(const std::vector<std::string>& t, size_t i) {
    return text::parse_double(t.at(i));
}

} // namespace

void save_scene(const SceneSpec& scene, const std::string& path) {
    std::ostringstream os;
    os << "himm-scene v1\n";
    os << "name " << text::encode_field(scene.name) << "\n";
    os << "seed " << scene.rng_seed << "\n";
    for (const Wall& w : scene.walls)
        os << "wall " << text::format_double(w.a.x) << " " << text::format_double(w.a.y)
           << " " << text::format_double(w.b.x) << " " << text::format_double(w.b.y)
           << "\n";
    for (const SceneObject& o : scene.objects)
        os << "object " << text::encode_field(o.category) << " "
           << text::format_double(o.position.x) << " " << text::format_double(o.position.y)
           << " " << text::format_double(o.position.z) << " "
           << text::format_double(o.extents.x) << " " << text::format_double(o.extents.y)
           << " " << text::format_double(o.extents.z) << " "
           << text::encode_field(o.area_tag) << "\n";
    for (const Pose& s : scene.spawns)
        os << "spawn " << text::format_double(s.position.x) << " "
           << text::format_double(s.position.y) << " " << text::format_double(s.yaw)
           << "\n";
    os << "end\n";
    write_file(path, os.str());
}

SceneSpec load_scene(const std::string& path) {
    const auto lines = read_lines(path);
    check_header(lines, "himm-scene", path);
    SceneSpec scene;
    bool ended = false;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto t = text::split_tokens(lines[i]);
        if (t.empty()) continue;
        if (ended) throw ValidationError(path + ": content after end marker");
        try {
            if (t[0] == "name" && t.size() == 2) {
                scene.name = text::decode_field(t[1]);
            } else if (t[0] == "seed" && t.size() == 2) {
                scene.rng_seed = std::stoull(t[1]);
            } else if (t[0] == "wall" && t.size() == 5) {
                scene.walls.push_back(
                    {{tok_d(t, 1), tok_d(t, 2)}, {tok_d(t, 3), tok_d(t, 4)}});
            } else if (t[0] == "object" && t.size() == 9) {
                scene.objects.push_back({text::decode_field(t[1]),
                                         {tok_d(t, 2), tok_d(t, 3), tok_d(t, 4)},
                                         {tok_d(t, 5), tok_d(t, 6), tok_d(t, 7)},
                                         text::decode_field(t[8])});
            } else if (t[0] == "spawn" && t.size() == 4) {
                scene.spawns.push_back(Pose::at(tok_d(t, 1), tok_d(t, 2), tok_d(t, 3)));
            } else if (t[0] == "end" && t.size() == 1) {
                ended = true;
            } else {
                throw ValidationError(path + ": bad scene line: " + lines[i]);
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError(path + ": bad number in line: " + lines[i]);
        } catch (const std::out_of_range&) {
            throw ValidationError(path + ": bad number in line: " + lines[i]);
        }
    }
    if (!ended) throw IntegrityError(path + ": missing end marker (truncated?)");
    validate_scene(scene, {});
    return scene;
}

void save_script(const EpisodeScript& script, const std::string& path) {
    std::ostringstream os;
    os << "himm-script v1\n";
    os << "scene " << text::encode_field(script.scene_ref) << "\n";
    os << "question " << text::encode_field(script.question) << "\n";
    os << "target " << text::encode_field(script.target_category) << "\n";
    os << "answer " << text::encode_field(script.gt_answer) << "\n";
    os << "modality " << modality_name(script.modality) << "\n";
    for (const Vec2& w : script.gt_trajectory.waypoints)
        os << "gt " << text::format_double(w.x) << " " << text::format_double(w.y)
           << "\n";
    os << "end\n";
    write_file(path, os.str());
}

EpisodeScript load_script(const std::string& path) {
    const auto lines = read_lines(path);
    check_header(lines, "himm-script", path);
    EpisodeScript script;
    bool ended = false;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto t = text::split_tokens(lines[i]);
        if (t.empty()) continue;
        if (ended) throw ValidationError(path + ": content after end marker");
        try {
            if (t[0] == "scene" && t.size() == 2) {
                script.scene_ref = text::decode_field(t[1]);
            } else if (t[0] == "question" && t.size() == 2) {
                script.question = text::decode_field(t[1]);
            } else if (t[0] == "target" && t.size() == 2) {
                script.target_category = text::decode_field(t[1]);
            } else if (t[0] == "answer" && t.size() == 2) {
                script.gt_answer = text::decode_field(t[1]);
            } else if (t[0] == "modality" && t.size() == 2) {
                const auto m = parse_modality(t[1]);
                if (!m) throw ValidationError(path + ": unknown modality " + t[1]);
                script.modality = *m;
            } else if (t[0] == "gt" && t.size() == 3) {
                script.gt_trajectory.waypoints.push_back({tok_d(t, 1), tok_d(t, 2)});
            } else if (t[0] == "end" && t.size() == 1) {
                ended = true;
            } else {
                throw ValidationError(path + ": bad script line: " + lines[i]);
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError(path + ": bad number in line: " + lines[i]);
        } catch (const std::out_of_range&) {
            throw ValidationError(path + ": bad number in line: " + lines[i]);
        }
    }
    if (!ended) throw IntegrityError(path + ": missing end marker (truncated?)");
    return script;
}

void save_vocabulary(const std::vector<std::string>& vocab, const std::string& path) {
    std::ostringstream os;
    os << "himm-vocab v1\n";
    for (const std::string& c : vocab) os << "category " << text::encode_field(c) << "\n";
    os << "end\n";
    write_file(path, os.str());
}

std::vector<std::string> load_vocabulary(const std::string& path) {
    const auto lines = read_lines(path);
    check_header(lines, "himm-vocab", path);
    std::vector<std::string> vocab;
    bool ended = false;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto t = text::split_tokens(lines[i]);
        if (t.empty()) continue;
        if (ended) throw ValidationError(path + ": content after end marker");
        if (t[0] == "category" && t.size() == 2)
            vocab.push_back(text::decode_field(t[1]));
        else if (t[0] == "end" && t.size() == 1)
            ended = true;
        else
            throw ValidationError(path + ": bad vocabulary line: " + lines[i]);
    }
    if (!ended) throw IntegrityError(path + ": missing end marker (truncated?)");
    return vocab;
}

const std::vector<std::string>& default_vocabulary() {
    static const std::vector<std::string> vocab = {
        "refrigerator", "sofa",     "bed",     "toilet",   "television", "plant",
        "chair",        "table",    "sink",    "oven",     "microwave",  "lamp",
        "bookshelf",    "mug",      "laptop",  "window",   "door",       "picture",
        "rug",          "trash_can", "kettle", "cushion",  "mirror",     "stool"};
    return vocab;
}

// --- generation ----------------------------------------------------------

std::pair<SceneSpec, EpisodeScript> generate_scene(uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& vocab = default_vocabulary();

    const int rooms = 2 + int(rng() % 3); // 2..4 in a row
    const double height = 4.0 + double(rng() % 21) * 0.1;
    std::vector<double> xs = {0.0};
    for (int r = 0; r < rooms; ++r)
        xs.push_back(xs.back() + 4.0 + double(rng() % 21) * 0.1);
    const double width = xs.back();

    SceneSpec scene;
    scene.rng_seed = seed;
    scene.name = "gen-" + std::to_string(seed);
    scene.walls.push_back({{0.0, 0.0}, {width, 0.0}});
    scene.walls.push_back({{0.0, height}, {width, height}});
    scene.walls.push_back({{0.0, 0.0}, {0.0, height}});
    scene.walls.push_back({{width, 0.0}, {width, height}});

    std::vector<double> door_centers;
    for (int r = 1; r < rooms; ++r) {
        const double x = xs[size_t(r)];
        const double lo_max = height - 1.8;
        const double door_lo = 0.8 + double(rng() % 101) / 100.0 * (lo_max - 0.8);
        const double door_hi = door_lo + 1.0;
        door_centers.push_back((door_lo + door_hi) / 2.0);
        scene.walls.push_back({{x, 0.0}, {x, door_lo}});
        scene.walls.push_back({{x, door_hi}, {x, height}});
    }

    // Distinct categories across the scene, a couple per room.
    std::vector<size_t> order(vocab.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    size_t next_cat = 0;
    for (int r = 0; r < rooms; ++r) {
        const int count = 2 + int(rng() % 2);
        for (int k = 0; k < count && next_cat < order.size(); ++k) {
            const double margin = 0.7;
            const double x = xs[size_t(r)] + margin +
                             double(rng() % 1001) / 1000.0 *
                                 (xs[size_t(r) + 1] - xs[size_t(r)] - 2.0 * margin);
            const double y =
                margin + double(rng() % 1001) / 1000.0 * (height - 2.0 * margin);
            const double e = 0.4 + double(rng() % 41) * 0.01;
            scene.objects.push_back({vocab[order[next_cat++]],
                                     {x, y, e / 2.0},
                                     {e, e, e},
                                     "room-" + std::to_string(r)});
        }
    }

    const Pose spawn = Pose::at(1.0, height / 2.0, 0.0);
    scene.spawns.push_back(spawn);

    // Target: first object placed in the last room.
    const SceneObject* target = nullptr;
    const std::string last_tag = "room-" + std::to_string(rooms - 1);
    for (const SceneObject& o : scene.objects)
        if (o.area_tag == last_tag) {
            target = &o;
            break;
        }
    if (!target) target = &scene.objects.back();

    EpisodeScript script;
    script.scene_ref = scene.name;
    script.target_category = target->category;
    script.question = "Where is the " + target->category + "?";
    script.gt_answer = "in the " + target->area_tag;
    script.modality = QuestionModality::Description;
    std::vector<Vec2>& wp = script.gt_trajectory.waypoints;
    wp.push_back(spawn.position.xy());
    for (size_t d = 0; d < door_centers.size(); ++d)
        wp.push_back({xs[d + 1], door_centers[d]});
    const Vec2 tp = target->position.xy();
    const Vec2 prev = wp.back();
    const double dist = distance(prev, tp);
    const double back = std::min(0.5, dist / 2.0);
    wp.push_back({tp.x + (prev.x - tp.x) / dist * back,
                  tp.y + (prev.y - tp.y) / dist * back});

    validate_scene(scene, vocab);
    validate_script(script, scene);
    return {std::move(scene), std::move(script)};
}

std::pair<SceneSpec, EpisodeScript> reference_scene() {
    SceneSpec scene;
    scene.name = "three-rooms";
    scene.rng_seed = 0;
    scene.walls = {
        {{0.0, 0.0}, {15.0, 0.0}},  {{0.0, 5.0}, {15.0, 5.0}},
        {{0.0, 0.0}, {0.0, 5.0}},   {{15.0, 0.0}, {15.0, 5.0}},
        {{5.0, 0.0}, {5.0, 2.0}},   {{5.0, 3.0}, {5.0, 5.0}},
        {{10.0, 0.0}, {10.0, 1.5}}, {{10.0, 2.5}, {10.0, 5.0}},
    };
    scene.objects = {
        {"sofa", {2.5, 1.2, 0.4}, {1.6, 0.8, 0.8}, "room-0"},
        {"lamp", {4.2, 4.0, 0.8}, {0.3, 0.3, 1.6}, "room-0"},
        {"table", {7.5, 2.6, 0.4}, {1.2, 0.8, 0.8}, "room-1"},
        {"plant", {6.2, 1.0, 0.5}, {0.4, 0.4, 1.0}, "room-1"},
        {"refrigerator", {13.5, 2.5, 0.9}, {0.8, 0.8, 1.8}, "room-2"},
        {"mug", {12.2, 3.8, 0.45}, {0.1, 0.1, 0.1}, "room-2"},
    };
    scene.spawns = {Pose::at(1.2, 2.5, 0.0)};

    EpisodeScript script;
    script.scene_ref = scene.name;
    script.question = "Where is the refrigerator?";
    script.target_category = "refrigerator";
    script.gt_answer = "in the far room";
    script.modality = QuestionModality::Description;
    script.gt_trajectory.waypoints = {
        {1.2, 2.5}, {5.0, 2.5}, {10.0, 2.0}, {12.7, 2.5}};

    validate_scene(scene, default_vocabulary());
    validate_script(script, scene);
    return {std::move(scene), std::move(script)};
}

} // namespace himm
