#include "afb/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "afb/errors.hpp"

namespace afb {

using nlohmann::json;

std::string to_string(Motion m) {
    switch (m) {
        case Motion::Static: return "static";
        case Motion::Linear: return "linear";
        case Motion::Sinusoidal: return "sinusoidal";
    }
    return "linear";
}

std::string to_string(Shape s) {
    switch (s) {
        case Shape::Disk: return "disk";
        case Shape::Rectangle: return "rectangle";
        case Shape::Triangle: return "triangle";
    }
    return "disk";
}

Motion parse_motion(const std::string& s) {
    if (s == "static") return Motion::Static;
    if (s == "linear") return Motion::Linear;
    if (s == "sinusoidal") return Motion::Sinusoidal;
    throw ConfigError("unknown motion model '" + s + "'");
}

Shape parse_shape(const std::string& s) {
    if (s == "disk") return Shape::Disk;
    if (s == "rectangle") return Shape::Rectangle;
    if (s == "triangle") return Shape::Triangle;
    throw ConfigError("unknown shape '" + s + "'");
}

void SceneSpec::validate() const {
    if (width < 16 || height < 16) throw ConfigError("frame must be at least 16x16");
    if (num_objects < 1 || num_objects > 5) throw ConfigError("num_objects must be in [1,5]");
    if (frames < 2) throw ConfigError("frames must be at least 2");
    if (!(drift >= 0.0 && drift <= 0.05)) throw ConfigError("drift must be in [0,0.05]");
    if (shapes.empty()) throw ConfigError("shape set is empty");
}

namespace {

constexpr double kTextureScale = 6.0;
constexpr int kPlacementAttempts = 1000;
constexpr double kHueWander = 0.35;   // half-width of the hue band, as a share of one object's sector

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    const std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL +
                                               static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y, double scale) {
    const double fx = x / scale;
    const double fy = y / scale;
    const double x0 = std::floor(fx);
    const double y0 = std::floor(fy);
    const auto ix = static_cast<std::int64_t>(x0);
    const auto iy = static_cast<std::int64_t>(y0);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double tx = smooth(fx - x0);
    const double ty = smooth(fy - y0);
    const double a = lattice(seed, ix, iy);
    const double b = lattice(seed, ix + 1, iy);
    const double c = lattice(seed, ix, iy + 1);
    const double d = lattice(seed, ix + 1, iy + 1);
    return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
}

double texture(std::uint64_t seed, double x, double y) {
    return 0.65 * value_noise(seed, x, y, kTextureScale) + 0.35 * value_noise(seed ^ 0x5bd1e995, x, y, 2.5);
}

void hsv_to_rgb(double h, double s, double v, std::uint8_t* out) {
    h -= std::floor(h);
    s = std::clamp(s, 0.0, 1.0);
    v = std::clamp(v, 0.0, 1.0);
    const double hh = h * 6.0;
    const int sector = static_cast<int>(std::floor(hh)) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s);
    const double q = v * (1 - s * f);
    const double t = v * (1 - s * (1 - f));
    double r = v, g = t, b = p;
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    out[0] = static_cast<std::uint8_t>(std::lround(r * 255.0));
    out[1] = static_cast<std::uint8_t>(std::lround(g * 255.0));
    out[2] = static_cast<std::uint8_t>(std::lround(b * 255.0));
}

}  // namespace

VideoGenerator::VideoGenerator(const SceneSpec& spec) : spec_(spec) {
    spec_.validate();
    Rng rng(spec_.seed);
    Rng place = rng.split(1);
    const double w = static_cast<double>(spec_.width);
    const double h = static_cast<double>(spec_.height);
    const std::size_t count = spec_.num_objects;
    background_hue_ = rng.split(2).uniform();
    background_seed_ = rng.split(3).next_u64();
    const double hue_offset = rng.split(4).uniform();

    for (std::size_t i = 0; i < count; ++i) {
        Rng orng = rng.split(100 + i);
        Object o{};
        o.shape = spec_.shapes[orng.below(spec_.shapes.size())];
        o.region_x0 = spec_.occlusion ? 0.0 : w * static_cast<double>(i) / static_cast<double>(count);
        o.region_x1 = spec_.occlusion ? w : w * static_cast<double>(i + 1) / static_cast<double>(count);
        const double lane = o.region_x1 - o.region_x0;
        const double base = orng.uniform(0.14, 0.2) * std::min(w, h);
        const double r = std::min({base, 0.4 * lane, 0.4 * h});
        switch (o.shape) {
            case Shape::Disk: o.rx = o.ry = r; break;
            case Shape::Rectangle:
                o.rx = r * orng.uniform(0.8, 1.0);
                o.ry = r * orng.uniform(0.7, 1.0);
                break;
            case Shape::Triangle:
                o.rx = r;
                o.ry = r * orng.uniform(0.85, 1.0);
                break;
        }
        if (2 * o.rx + 2 > lane || 2 * o.ry + 2 > h) throw ConfigError("objects too large to place disjointly");
        o.hue = hue_offset + (static_cast<double>(i) + 0.5) / static_cast<double>(count) + orng.uniform(-0.04, 0.04);
        o.texture_seed = orng.next_u64();

        const bool crossing_pair = spec_.occlusion && count >= 2 && i < 2;
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            if (crossing_pair) {
                o.cx = i == 0 ? w * 0.25 : w * 0.75;
                o.cy = h * 0.5 + place.uniform(-0.1, 0.1) * h;
                o.cx = std::clamp(o.cx, o.rx + 1, w - o.rx - 1);
            } else {
                o.cx = place.uniform(o.region_x0 + o.rx + 1, o.region_x1 - o.rx - 1);
                o.cy = place.uniform(o.ry + 1, h - o.ry - 1);
            }
            const BoundingBox mine{o.cx - o.rx, o.cy - o.ry, o.cx + o.rx, o.cy + o.ry};
            placed = std::none_of(objects_.begin(), objects_.end(), [&](const Object& other) {
                return mine.overlaps({other.cx - other.rx, other.cy - other.ry, other.cx + other.rx, other.cy + other.ry});
            });
        }
        if (!placed) throw ConfigError("objects too large to place disjointly");
        o.ox = o.cx;
        o.oy = o.cy;

        switch (spec_.motion) {
            case Motion::Static: break;
            case Motion::Linear: {
                const double speed = orng.uniform(0.6, 1.4);
                double angle = orng.uniform(0.0, 2.0 * std::numbers::pi);
                if (crossing_pair) angle = (i == 0 ? 0.0 : std::numbers::pi) + orng.uniform(-0.2, 0.2);
                o.vx = speed * std::cos(angle);
                o.vy = speed * std::sin(angle);
                break;
            }
            case Motion::Sinusoidal: {
                const double room_x = std::min(o.cx - o.rx - o.region_x0, o.region_x1 - o.cx - o.rx) - 1;
                const double room_y = std::min(o.cy - o.ry, h - o.cy - o.ry) - 1;
                o.amp_x = std::max(0.0, crossing_pair ? room_x : std::min(room_x, 0.25 * lane));
                o.amp_y = std::max(0.0, std::min(room_y, 0.25 * h));
                o.period = orng.uniform(40.0, 80.0);
                o.phase = orng.uniform(0.0, 2.0 * std::numbers::pi);
                break;
            }
        }
        objects_.push_back(o);
    }
}

std::vector<BoundingBox> VideoGenerator::boxes() const {
    std::vector<BoundingBox> out;
    for (const Object& o : objects_) out.push_back({o.cx - o.rx, o.cy - o.ry, o.cx + o.rx, o.cy + o.ry});
    return out;
}

bool VideoGenerator::contains(const Object& o, double px, double py) const {
    const double dx = px - o.cx;
    const double dy = py - o.cy;
    switch (o.shape) {
        case Shape::Disk: return dx * dx + dy * dy <= o.rx * o.rx;
        case Shape::Rectangle: return std::abs(dx) <= o.rx && std::abs(dy) <= o.ry;
        case Shape::Triangle: {
            // Apex at top center, base along the bottom edge of the box.
            if (dy < -o.ry || dy > o.ry) return false;
            const double half_width = o.rx * (dy + o.ry) / (2.0 * o.ry);
            return std::abs(dx) <= half_width;
        }
    }
    return false;
}

void VideoGenerator::advance() {
    const double h = static_cast<double>(spec_.height);
    const double t = static_cast<double>(t_);
    for (Object& o : objects_) {
        switch (spec_.motion) {
            case Motion::Static: break;
            case Motion::Linear: {
                o.cx += o.vx;
                o.cy += o.vy;
                const double lo_x = o.region_x0 + o.rx, hi_x = o.region_x1 - o.rx;
                const double lo_y = o.ry, hi_y = h - o.ry;
                if (o.cx < lo_x) { o.cx = 2 * lo_x - o.cx; o.vx = -o.vx; }
                if (o.cx > hi_x) { o.cx = 2 * hi_x - o.cx; o.vx = -o.vx; }
                if (o.cy < lo_y) { o.cy = 2 * lo_y - o.cy; o.vy = -o.vy; }
                if (o.cy > hi_y) { o.cy = 2 * hi_y - o.cy; o.vy = -o.vy; }
                break;
            }
            case Motion::Sinusoidal: {
                const double phase = 2.0 * std::numbers::pi * t / o.period;
                o.cx = o.ox + o.amp_x * std::sin(phase + o.phase) - o.amp_x * std::sin(o.phase);
                o.cy = o.oy + o.amp_y * std::sin(0.7 * phase + o.phase) - o.amp_y * std::sin(o.phase);
                break;
            }
        }
    }
}

void VideoGenerator::next(RgbImage& frame, LabelMap& gt) {
    if (done()) throw std::logic_error("VideoGenerator: no frames left");
    const std::size_t w = spec_.width;
    const std::size_t h = spec_.height;
    const double t = static_cast<double>(t_);
    const double shift = spec_.drift * t * kTextureScale;
    // Hue moves at the drift rate but bounces inside the object's own sector of
    // the colour wheel, so objects never trade appearances.
    const double amplitude = kHueWander / static_cast<double>(objects_.size());
    const double travel = std::fmod(spec_.drift * t + amplitude, 4.0 * amplitude);
    const double hue_wander = travel < 2.0 * amplitude ? travel - amplitude : 3.0 * amplitude - travel;
    frame = RgbImage(w, h);
    gt = LabelMap(h, w, 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double px = static_cast<double>(x) + 0.5;
            const double py = static_cast<double>(y) + 0.5;
            std::size_t label = 0;
            for (std::size_t i = objects_.size(); i-- > 0;) {
                if (contains(objects_[i], px, py)) {
                    label = i + 1;
                    break;
                }
            }
            gt(y, x) = static_cast<std::uint8_t>(label);
            if (label == 0) {
                const double tex = texture(background_seed_, px, py);
                hsv_to_rgb(background_hue_, 0.2, 0.45 + 0.5 * (tex - 0.5), frame.at(y, x));
            } else {
                const Object& o = objects_[label - 1];
                const double lx = px - o.cx + shift;
                const double ly = py - o.cy;
                const double tex = texture(o.texture_seed, lx, ly);
                const double hue = o.hue + hue_wander + 0.03 * (tex - 0.5);
                hsv_to_rgb(hue, 0.7, 0.6 + 0.45 * (tex - 0.5), frame.at(y, x));
            }
        }
    }
    ++t_;
    advance();
}

VideoSequence generate(const SceneSpec& spec) {
    VideoGenerator gen(spec);
    VideoSequence video;
    video.spec = spec;
    video.frames.resize(spec.frames);
    video.gt.resize(spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) {
        gen.next(video.frames[t], video.gt[t]);
        video.annotated.push_back(t);
    }
    return video;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.ppm", index);
    return dir / "frames" / name;
}

std::filesystem::path mask_path(const std::filesystem::path& dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", index);
    return dir / "masks" / name;
}

namespace {

json meta_json(const SceneSpec& spec, const std::vector<std::size_t>& annotated) {
    json shapes = json::array();
    for (Shape s : spec.shapes) shapes.push_back(to_string(s));
    return json{{"format", "afb-synth"},
                {"version", 1},
                {"width", spec.width},
                {"height", spec.height},
                {"num_objects", spec.num_objects},
                {"frames", spec.frames},
                {"seed", spec.seed},
                {"motion", to_string(spec.motion)},
                {"drift", spec.drift},
                {"occlusion", spec.occlusion},
                {"shapes", shapes},
                {"annotated", annotated}};
}

void write_meta(const std::filesystem::path& dir, const SceneSpec& spec, const std::vector<std::size_t>& annotated) {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "meta.json").string());
    out << meta_json(spec, annotated).dump(2) << "\n";
}

void prepare_dirs(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "frames");
    std::filesystem::create_directories(dir / "masks");
}

std::size_t count_files(const std::filesystem::path& dir, const std::string& ext) {
    if (!std::filesystem::is_directory(dir)) return 0;
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) ++n;
    }
    return n;
}

SceneSpec spec_from_meta(const json& meta, const std::filesystem::path& where) {
    try {
        SceneSpec spec;
        spec.width = meta.at("width").get<std::size_t>();
        spec.height = meta.at("height").get<std::size_t>();
        spec.num_objects = meta.at("num_objects").get<std::size_t>();
        spec.frames = meta.at("frames").get<std::size_t>();
        spec.seed = meta.at("seed").get<std::uint64_t>();
        spec.motion = parse_motion(meta.at("motion").get<std::string>());
        spec.drift = meta.at("drift").get<double>();
        spec.occlusion = meta.at("occlusion").get<bool>();
        spec.shapes.clear();
        for (const auto& s : meta.at("shapes")) spec.shapes.push_back(parse_shape(s.get<std::string>()));
        return spec;
    } catch (const json::exception& e) {
        throw DataError(where.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(where.string() + ": " + e.what());
    }
}

}  // namespace

void save_dataset(const VideoSequence& video, const std::filesystem::path& dir) {
    if (video.frames.size() != video.gt.size()) throw std::invalid_argument("save_dataset: frame/mask count mismatch");
    prepare_dirs(dir);
    for (std::size_t t = 0; t < video.frames.size(); ++t) {
        write_ppm(frame_path(dir, t), video.frames[t]);
        write_pgm(mask_path(dir, t), video.gt[t]);
    }
    write_meta(dir, video.spec, video.annotated);
}

void generate_to_dir(const SceneSpec& spec, const std::filesystem::path& dir) {
    VideoGenerator gen(spec);
    prepare_dirs(dir);
    RgbImage frame;
    LabelMap gt;
    std::vector<std::size_t> annotated;
    for (std::size_t t = 0; t < spec.frames; ++t) {
        gen.next(frame, gt);
        write_ppm(frame_path(dir, t), frame);
        write_pgm(mask_path(dir, t), gt);
        annotated.push_back(t);
    }
    write_meta(dir, spec, annotated);
}

DatasetReader::DatasetReader(std::filesystem::path dir) : dir_(std::move(dir)) {
    const auto meta_file = dir_ / "meta.json";
    std::ifstream in(meta_file);
    if (!in) throw DataError("cannot open " + meta_file.string());
    json meta;
    try {
        meta = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(meta_file.string() + ": " + e.what());
    }
    spec_ = spec_from_meta(meta, meta_file);
    try {
        annotated_ = meta.at("annotated").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw DataError(meta_file.string() + ": " + e.what());
    }
    const std::size_t frames = count_files(dir_ / "frames", ".ppm");
    const std::size_t masks = count_files(dir_ / "masks", ".pgm");
    if (frames != masks) {
        throw DataError(dir_.string() + ": frame/mask count mismatch (" + std::to_string(frames) + " frames, " +
                        std::to_string(masks) + " masks)");
    }
    if (frames != spec_.frames) {
        throw DataError(dir_.string() + ": meta.json declares " + std::to_string(spec_.frames) + " frames but " +
                        std::to_string(frames) + " are present");
    }
    for (std::size_t t = 0; t < frames; ++t) {
        if (!std::filesystem::exists(frame_path(dir_, t)) || !std::filesystem::exists(mask_path(dir_, t)))
            throw DataError(dir_.string() + ": missing files for frame " + std::to_string(t));
    }
    count_ = frames;
}

RgbImage DatasetReader::frame(std::size_t index) const {
    RgbImage img = read_ppm(frame_path(dir_, index));
    if (img.width != spec_.width || img.height != spec_.height)
        throw DataError(frame_path(dir_, index).string() + ": size differs from meta.json");
    return img;
}

LabelMap DatasetReader::mask(std::size_t index) const {
    LabelMap m = read_pgm(mask_path(dir_, index));
    if (m.width() != spec_.width || m.height() != spec_.height)
        throw DataError(mask_path(dir_, index).string() + ": size differs from meta.json");
    for (auto v : m.cells()) {
        if (v > spec_.num_objects) throw DataError(mask_path(dir_, index).string() + ": label exceeds num_objects");
    }
    return m;
}

VideoSequence load_dataset(const std::filesystem::path& dir) {
    DatasetReader reader(dir);
    VideoSequence video;
    video.spec = reader.spec();
    video.annotated = reader.annotated();
    video.frames.reserve(reader.size());
    video.gt.reserve(reader.size());
    for (std::size_t t = 0; t < reader.size(); ++t) {
        video.frames.push_back(reader.frame(t));
        video.gt.push_back(reader.mask(t));
    }
    return video;
}

}  // namespace afb
