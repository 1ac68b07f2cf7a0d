#include "himm/persistence.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "himm/text_format.hpp"

namespace fs = std::filesystem;

namespace himm {

namespace {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path);
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> split_lines(const std::string& bytes) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : bytes) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

// Envelope: "<magic> v1", body lines, "checksum <fnv>", "end". The
// checksum covers the body bytes exactly as written.
void write_envelope(const std::string& magic, const std::string& body,
                    const std::string& path) {
    std::string out;
    out.reserve(magic.size() + body.size() + 32);
    out += magic;
    out += " v1\n";
    out += body;
    out += "checksum ";
    out += text::checksum_hex(body);
    out += "\nend\n";
    write_file(path, out);
}

std::vector<std::string> open_envelope(const std::string& magic, const std::string& path) {
    const auto lines = split_lines(read_file_bytes(path));
    if (lines.empty()) throw IntegrityError(path + ": empty file");
    const auto head = text::split_tokens(lines[0]);
    if (head.size() != 2 || head[0] != magic)
        throw ValidationError(path + ": expected a " + magic + " file");
    if (head[1] != "v1")
        throw MigrationError(path + ": unsupported " + magic + " version " + head[1]);
    if (lines.size() < 3 || lines.back() != "end")
        throw IntegrityError(path + ": missing end marker (truncated?)");
    const auto ck = text::split_tokens(lines[lines.size() - 2]);
    if (ck.size() != 2 || ck[0] != "checksum")
        throw IntegrityError(path + ": missing checksum line");
    std::string body;
    for (size_t i = 1; i + 2 < lines.size(); ++i) {
        body += lines[i];
        body += '\n';
    }
    if (text::checksum_hex(body) != ck[1])
        throw IntegrityError(path + ": checksum mismatch");
    return {lines.begin() + 1, lines.end() - 2};
}

long long parse_int(const std::string& tok, const std::string& path) {
    try {
        size_t used = 0;
        long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw ValidationError("");
        return v;
    } catch (const std::exception&) {
        throw ValidationError(path + ": bad integer '" + tok + "'");
    }
}

size_t parse_count(const std::string& tok, const std::string& path) {
    long long v = parse_int(tok, path);
    if (v < 0) throw ValidationError(path + ": negative count '" + tok + "'");
    return size_t(v);
}

double parse_num(const std::string& tok, const std::string& path) {
    try {
        return text::parse_double(tok);
    } catch (const std::exception&) {
        throw ValidationError(path + ": bad number '" + tok + "'");
    }
}

char cell_letter(CellState s) {
    switch (s) {
        case CellState::Unknown: return 'U';
        case CellState::Free: return 'F';
        case CellState::Occupied: return 'O';
    }
    return 'U';
}

std::string semantic_body(const SemanticStore& store) {
    std::ostringstream os;
    os << "dim " << store.dim() << "\n";
    for (size_t i = 0; i < store.size(); ++i) {
        const Observation& o = store.at(i);
        os << "obs " << text::encode_field(o.id) << ' ' << text::encode_field(o.episode_id)
           << ' ' << o.timestep << ' ' << text::format_double(o.pose.position.x) << ' '
           << text::format_double(o.pose.position.y) << ' '
           << text::format_double(o.pose.position.z) << ' '
           << text::format_double(o.pose.yaw) << ' ' << text::encode_field(o.image_ref)
           << ' ' << text::encode_floats(o.global_embedding) << ' ' << o.regions.size()
           << "\n";
        for (const RegionEntry& r : o.regions) {
            os << "region " << text::encode_floats(r.embedding) << ' '
               << text::format_double(r.box3d.center.x) << ' '
               << text::format_double(r.box3d.center.y) << ' '
               << text::format_double(r.box3d.center.z) << ' '
               << text::format_double(r.box3d.extents.x) << ' '
               << text::format_double(r.box3d.extents.y) << ' '
               << text::format_double(r.box3d.extents.z) << ' '
               << text::encode_field(r.label) << "\n";
        }
    }
    return os.str();
}

// Consumes the "dim" line plus every following obs/region line, leaving
// `i` on the first line that belongs to the caller.
SemanticStore parse_semantic(const std::vector<std::string>& lines, size_t& i,
                             const std::string& path) {
    if (i >= lines.size()) throw IntegrityError(path + ": missing dim line");
    const auto dim_tokens = text::split_tokens(lines[i]);
    if (dim_tokens.size() != 2 || dim_tokens[0] != "dim")
        throw ValidationError(path + ": expected dim line, got '" + lines[i] + "'");
    SemanticStore store(parse_count(dim_tokens[1], path));
    ++i;
    while (i < lines.size()) {
        const auto t = text::split_tokens(lines[i]);
        if (t.empty() || t[0] != "obs") break;
        if (t.size() != 11) throw ValidationError(path + ": malformed obs line");
        Observation o;
        o.id = text::decode_field(t[1]);
        o.episode_id = text::decode_field(t[2]);
        o.timestep = int(parse_int(t[3], path));
        o.pose.position = {parse_num(t[4], path), parse_num(t[5], path), parse_num(t[6], path)};
        o.pose.yaw = parse_num(t[7], path);
        o.image_ref = text::decode_field(t[8]);
        o.global_embedding = text::decode_floats(t[9]);
        const size_t nregions = parse_count(t[10], path);
        ++i;
        for (size_t r = 0; r < nregions; ++r, ++i) {
            if (i >= lines.size())
                throw IntegrityError(path + ": region lines truncated");
            const auto rt = text::split_tokens(lines[i]);
            if (rt.size() != 9 || rt[0] != "region")
                throw ValidationError(path + ": malformed region line");
            RegionEntry e;
            e.embedding = text::decode_floats(rt[1]);
            e.box3d.center = {parse_num(rt[2], path), parse_num(rt[3], path),
                              parse_num(rt[4], path)};
            e.box3d.extents = {parse_num(rt[5], path), parse_num(rt[6], path),
                               parse_num(rt[7], path)};
            e.label = text::decode_field(rt[8]);
            o.regions.push_back(std::move(e));
        }
        store.insert(std::move(o));
    }
    return store;
}

std::string episode_basename(size_t index) {
    std::string n = std::to_string(index);
    while (n.size() < 4) n.insert(n.begin(), '0');
    return "ep-" + n + ".mem";
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

} // namespace

std::string encode_cells_rle(const OccupancyGrid& grid) {
    const auto& cells = grid.raw();
    std::string out;
    size_t i = 0;
    while (i < cells.size()) {
        size_t j = i;
        while (j < cells.size() && cells[j] == cells[i]) ++j;
        out += std::to_string(j - i);
        out += cell_letter(CellState(cells[i]));
        i = j;
    }
    return out;
}

std::vector<uint8_t> decode_cells_rle(const std::string& rle, size_t expected) {
    std::vector<uint8_t> out;
    out.reserve(expected);
    size_t i = 0;
    while (i < rle.size()) {
        size_t count = 0;
        bool digits = false;
        while (i < rle.size() && std::isdigit(static_cast<unsigned char>(rle[i]))) {
            count = count * 10 + size_t(rle[i] - '0');
            if (count > expected) throw IntegrityError("cell run exceeds grid size");
            ++i;
            digits = true;
        }
        if (!digits) throw IntegrityError("cell run without a count");
        if (count == 0) throw IntegrityError("zero-length cell run");
        if (i >= rle.size()) throw IntegrityError("cell run without a state letter");
        uint8_t state = 0;
        switch (rle[i]) {
            case 'U': state = uint8_t(CellState::Unknown); break;
            case 'F': state = uint8_t(CellState::Free); break;
            case 'O': state = uint8_t(CellState::Occupied); break;
            default: throw IntegrityError(std::string("unknown cell state letter '") + rle[i] + "'");
        }
        ++i;
        if (out.size() + count > expected) throw IntegrityError("cell runs exceed grid size");
        out.insert(out.end(), count, state);
    }
    if (out.size() != expected) throw IntegrityError("cell runs do not cover the grid");
    return out;
}

void save_semantic(const SemanticStore& store, const std::string& path) {
    write_envelope("himm-semantic", semantic_body(store), path);
}

SemanticStore load_semantic(const std::string& path) {
    const auto lines = open_envelope("himm-semantic", path);
    size_t i = 0;
    SemanticStore store = parse_semantic(lines, i, path);
    if (i != lines.size())
        throw ValidationError(path + ": unexpected line '" + lines[i] + "'");
    return store;
}

void save_rules(const RuleStore& store, const std::string& path) {
    std::ostringstream os;
    os << "dim " << store.dim() << "\n";
    for (const Rule& r : store.rules()) {
        os << "rule " << rule_form_name(r.form) << ' ' << text::encode_field(r.key) << ' '
           << text::encode_field(r.value) << ' ' << text::encode_field(r.anchor) << ' '
           << text::encode_field(r.source_episode_id) << ' '
           << text::encode_floats(r.question_embedding) << "\n";
    }
    write_envelope("himm-rules", os.str(), path);
}

RuleStore load_rules(const std::string& path) {
    const auto lines = open_envelope("himm-rules", path);
    if (lines.empty()) throw IntegrityError(path + ": missing dim line");
    const auto dim_tokens = text::split_tokens(lines[0]);
    if (dim_tokens.size() != 2 || dim_tokens[0] != "dim")
        throw ValidationError(path + ": expected dim line");
    RuleStore store(parse_count(dim_tokens[1], path));
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto t = text::split_tokens(lines[i]);
        if (t.size() != 7 || t[0] != "rule")
            throw ValidationError(path + ": malformed rule line");
        Rule r;
        const auto form = parse_rule_form(t[1]);
        if (!form) throw ValidationError(path + ": unknown rule form '" + t[1] + "'");
        r.form = *form;
        r.key = text::decode_field(t[2]);
        r.value = text::decode_field(t[3]);
        r.anchor = text::decode_field(t[4]);
        r.source_episode_id = text::decode_field(t[5]);
        r.question_embedding = text::decode_floats(t[6]);
        store.add_rule(std::move(r));
    }
    return store;
}

void save_episode_record(const EpisodeRecord& record, const std::string& path) {
    std::ostringstream os;
    os << "id " << text::encode_field(record.episode_id) << ' ' << record.created_at << ' '
       << text::encode_field(record.scene_tag) << "\n";
    os << semantic_body(record.semantic_space);
    const OccupancyGrid& g = record.physical_space;
    os << "map " << text::format_double(g.resolution()) << ' '
       << text::format_double(g.origin().x) << ' ' << text::format_double(g.origin().y)
       << ' ' << g.width() << ' ' << g.height() << ' ' << encode_cells_rle(g) << "\n";
    write_envelope("himm-episode", os.str(), path);
}

EpisodeRecord load_episode_record(const std::string& path) {
    const auto lines = open_envelope("himm-episode", path);
    if (lines.empty()) throw IntegrityError(path + ": missing id line");
    const auto id_tokens = text::split_tokens(lines[0]);
    if (id_tokens.size() != 4 || id_tokens[0] != "id")
        throw ValidationError(path + ": expected id line");
    EpisodeRecord record;
    record.episode_id = text::decode_field(id_tokens[1]);
    record.created_at = parse_int(id_tokens[2], path);
    record.scene_tag = text::decode_field(id_tokens[3]);
    size_t i = 1;
    record.semantic_space = parse_semantic(lines, i, path);
    if (i >= lines.size()) throw IntegrityError(path + ": missing map line");
    const auto mt = text::split_tokens(lines[i]);
    if (mt.size() != 7 || mt[0] != "map")
        throw ValidationError(path + ": malformed map line");
    const double res = parse_num(mt[1], path);
    const Vec2 origin{parse_num(mt[2], path), parse_num(mt[3], path)};
    const int width = int(parse_count(mt[4], path));
    const int height = int(parse_count(mt[5], path));
    OccupancyGrid grid(res, origin, width, height);
    const auto cells = decode_cells_rle(mt[6], size_t(width) * size_t(height));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            grid.set({x, y}, CellState(cells[size_t(y) * size_t(width) + size_t(x)]));
    record.physical_space = std::move(grid);
    ++i;
    if (i != lines.size())
        throw ValidationError(path + ": unexpected line '" + lines[i] + "'");
    return record;
}

void save_episodic(const EpisodicStore& store, const std::string& dir) {
    fs::create_directories(dir);
    std::ostringstream os;
    os << "dim " << store.dim() << "\n";
    for (size_t i = 0; i < store.episodes().size(); ++i) {
        const std::string name = episode_basename(i);
        save_episode_record(store.episodes()[i], join(dir, name));
        os << "episode " << text::encode_field(name) << "\n";
    }
    write_envelope("himm-episodic", os.str(), join(dir, "episodes.idx"));
}

EpisodicStore load_episodic(const std::string& dir) {
    const std::string index_path = join(dir, "episodes.idx");
    const auto lines = open_envelope("himm-episodic", index_path);
    if (lines.empty()) throw IntegrityError(index_path + ": missing dim line");
    const auto dim_tokens = text::split_tokens(lines[0]);
    if (dim_tokens.size() != 2 || dim_tokens[0] != "dim")
        throw ValidationError(index_path + ": expected dim line");
    EpisodicStore store(parse_count(dim_tokens[1], index_path));
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto t = text::split_tokens(lines[i]);
        if (t.size() != 2 || t[0] != "episode")
            throw ValidationError(index_path + ": malformed episode line");
        store.add_episode(load_episode_record(join(dir, text::decode_field(t[1]))));
    }
    return store;
}

std::string snapshot_memory(const EpisodicStore& episodic, const RuleStore& rules,
                            const std::string& dir) {
    fs::create_directories(dir);
    save_episodic(episodic, dir);
    save_rules(rules, join(dir, "rules.mem"));
    std::vector<std::string> names;
    names.push_back("episodes.idx");
    names.push_back("rules.mem");
    for (size_t i = 0; i < episodic.size(); ++i) names.push_back(episode_basename(i));
    std::ostringstream os;
    os << "episodic " << text::encode_field("episodes.idx") << "\n";
    os << "rules " << text::encode_field("rules.mem") << "\n";
    for (const std::string& name : names)
        os << "file " << text::encode_field(name) << ' '
           << text::checksum_hex(read_file_bytes(join(dir, name))) << "\n";
    const std::string manifest_path = join(dir, "manifest.mem");
    write_envelope("himm-manifest", os.str(), manifest_path);
    return manifest_path;
}

MemoryStores load_memory(const std::string& dir) {
    const std::string manifest_path = join(dir, "manifest.mem");
    const auto lines = open_envelope("himm-manifest", manifest_path);
    std::string episodic_name;
    std::string rules_name;
    for (const std::string& line : lines) {
        const auto t = text::split_tokens(line);
        if (t.size() == 2 && t[0] == "episodic") {
            episodic_name = text::decode_field(t[1]);
        } else if (t.size() == 2 && t[0] == "rules") {
            rules_name = text::decode_field(t[1]);
        } else if (t.size() == 3 && t[0] == "file") {
            const std::string name = text::decode_field(t[1]);
            if (text::checksum_hex(read_file_bytes(join(dir, name))) != t[2])
                throw IntegrityError(join(dir, name) + ": checksum mismatch against manifest");
        } else {
            throw ValidationError(manifest_path + ": malformed line '" + line + "'");
        }
    }
    if (episodic_name != "episodes.idx")
        throw ValidationError(manifest_path + ": unexpected episodic index name");
    if (rules_name.empty())
        throw ValidationError(manifest_path + ": missing rules entry");
    return {load_episodic(dir), load_rules(join(dir, rules_name))};
}

void save_map_pgm(const OccupancyGrid& grid, const std::string& path, bool binary) {
    const auto shade = [](uint8_t cell) -> uint8_t {
        switch (CellState(cell)) {
            case CellState::Unknown: return 128;
            case CellState::Free: return 255;
            case CellState::Occupied: return 0;
        }
        return 128;
    };
    std::string out = binary ? "P5" : "P2";
    out += "\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n255\n";
    const auto& cells = grid.raw();
    for (int y = grid.height() - 1; y >= 0; --y) {
        for (int x = 0; x < grid.width(); ++x) {
            const uint8_t v = shade(cells[size_t(y) * size_t(grid.width()) + size_t(x)]);
            if (binary) {
                out.push_back(char(v));
            } else {
                if (x > 0) out.push_back(' ');
                out += std::to_string(int(v));
            }
        }
        if (!binary) out.push_back('\n');
    }
    write_file(path, out);
}

namespace {

std::string pose_fields(const Pose& p) {
    return text::format_double(p.position.x) + ' ' + text::format_double(p.position.y) +
           ' ' + text::format_double(p.position.z) + ' ' + text::format_double(p.yaw);
}

Pose parse_pose_fields(const std::vector<std::string>& t, size_t from,
                       const std::string& path) {
    Pose p;
    p.position = {parse_num(t[from], path), parse_num(t[from + 1], path),
                  parse_num(t[from + 2], path)};
    p.yaw = parse_num(t[from + 3], path);
    return p;
}

} // namespace

void save_annotated_map(const AnnotatedExplorationMap& map, const std::string& path) {
    std::ostringstream os;
    const OccupancyGrid& g = map.grid;
    os << "map " << text::format_double(g.resolution()) << ' '
       << text::format_double(g.origin().x) << ' ' << text::format_double(g.origin().y)
       << ' ' << g.width() << ' ' << g.height() << ' ' << encode_cells_rle(g) << "\n";
    os << "agent " << pose_fields(map.agent_pose) << "\n";
    for (const Pose& p : map.retrieved_poses) os << "pose " << pose_fields(p) << "\n";
    for (const Frontier& f : map.frontiers) {
        os << "frontier " << text::format_double(f.centroid.x) << ' '
           << text::format_double(f.centroid.y) << ' ' << (f.rho ? 1 : 0) << ' '
           << f.cells.size();
        for (const GridIndex& c : f.cells) os << ' ' << c.x << ' ' << c.y;
        os << "\n";
    }
    write_envelope("himm-map", os.str(), path);
}

AnnotatedExplorationMap load_annotated_map(const std::string& path) {
    const auto lines = open_envelope("himm-map", path);
    AnnotatedExplorationMap map;
    bool saw_map = false;
    bool saw_agent = false;
    for (const std::string& line : lines) {
        const auto t = text::split_tokens(line);
        if (t.size() == 7 && t[0] == "map") {
            const double res = parse_num(t[1], path);
            const Vec2 origin{parse_num(t[2], path), parse_num(t[3], path)};
            const int width = int(parse_count(t[4], path));
            const int height = int(parse_count(t[5], path));
            OccupancyGrid grid(res, origin, width, height);
            const auto cells = decode_cells_rle(t[6], size_t(width) * size_t(height));
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    grid.set({x, y}, CellState(cells[size_t(y) * size_t(width) + size_t(x)]));
            map.grid = std::move(grid);
            saw_map = true;
        } else if (t.size() == 5 && t[0] == "agent") {
            map.agent_pose = parse_pose_fields(t, 1, path);
            saw_agent = true;
        } else if (t.size() == 5 && t[0] == "pose") {
            map.retrieved_poses.push_back(parse_pose_fields(t, 1, path));
        } else if (t.size() >= 5 && t[0] == "frontier") {
            Frontier f;
            f.centroid = {parse_num(t[1], path), parse_num(t[2], path)};
            f.rho = parse_int(t[3], path) != 0;
            const size_t n = parse_count(t[4], path);
            if (t.size() != 5 + 2 * n)
                throw ValidationError(path + ": frontier cell count mismatch");
            for (size_t i = 0; i < n; ++i)
                f.cells.push_back({int(parse_int(t[5 + 2 * i], path)),
                                   int(parse_int(t[6 + 2 * i], path))});
            f.size = int(n);
            map.frontiers.push_back(std::move(f));
        } else {
            throw ValidationError(path + ": malformed line '" + line + "'");
        }
    }
    if (!saw_map || !saw_agent)
        throw IntegrityError(path + ": missing map or agent line");
    return map;
}

void save_trace(const EpisodeTrace& trace, const std::string& path) {
    std::ostringstream os;
    os << "episode " << text::encode_field(trace.log.episode_id) << "\n";
    os << "instruction " << text::encode_field(trace.log.instruction) << "\n";
    os << "gtanswer " << text::encode_field(trace.gt_answer) << "\n";
    for (const Vec2& w : trace.gt.waypoints)
        os << "gtwp " << text::format_double(w.x) << ' ' << text::format_double(w.y) << "\n";
    for (const LogEntry& e : trace.log.entries)
        os << "entry " << e.point.timestep << ' ' << cognitive_state_name(e.point.state)
           << ' ' << text::format_double(e.point.position.x) << ' '
           << text::format_double(e.point.position.y) << ' '
           << text::encode_field(e.point.image_ref) << ' ' << text::encode_field(e.summary)
           << "\n";
    write_envelope("himm-trace", os.str(), path);
}

EpisodeTrace load_trace(const std::string& path) {
    const auto lines = open_envelope("himm-trace", path);
    EpisodeTrace trace;
    bool saw_episode = false;
    bool saw_instruction = false;
    bool saw_answer = false;
    for (const std::string& line : lines) {
        const auto t = text::split_tokens(line);
        if (t.size() == 2 && t[0] == "episode") {
            trace.log.episode_id = text::decode_field(t[1]);
            saw_episode = true;
        } else if (t.size() == 2 && t[0] == "instruction") {
            trace.log.instruction = text::decode_field(t[1]);
            saw_instruction = true;
        } else if (t.size() == 2 && t[0] == "gtanswer") {
            trace.gt_answer = text::decode_field(t[1]);
            saw_answer = true;
        } else if (t.size() == 3 && t[0] == "gtwp") {
            trace.gt.waypoints.push_back({parse_num(t[1], path), parse_num(t[2], path)});
        } else if (t.size() == 7 && t[0] == "entry") {
            LogEntry e;
            e.point.timestep = int(parse_int(t[1], path));
            const auto state = parse_cognitive_state(t[2]);
            if (!state) throw ValidationError(path + ": unknown state '" + t[2] + "'");
            e.point.state = *state;
            e.point.position = {parse_num(t[3], path), parse_num(t[4], path)};
            e.point.image_ref = text::decode_field(t[5]);
            e.summary = text::decode_field(t[6]);
            trace.log.entries.push_back(std::move(e));
        } else {
            throw ValidationError(path + ": malformed line '" + line + "'");
        }
    }
    if (!saw_episode || !saw_instruction || !saw_answer)
        throw IntegrityError(path + ": missing episode/instruction/gtanswer line");
    return trace;
}

} // namespace himm
