#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afb/image.hpp"
#include "afb/numerics.hpp"

namespace afb {

enum class Motion { Static, Linear, Sinusoidal };
enum class Shape { Disk, Rectangle, Triangle };

std::string to_string(Motion m);
std::string to_string(Shape s);
Motion parse_motion(const std::string& s);
Shape parse_shape(const std::string& s);

struct SceneSpec {
    std::size_t width = 128;
    std::size_t height = 128;
    std::size_t num_objects = 2;
    std::size_t frames = 50;
    std::uint64_t seed = 1;
    Motion motion = Motion::Linear;
    double drift = 0.0;          // hue turns and texture cells per frame (hue bounces in a band)
    bool occlusion = false;      // objects share the frame and may cross
    std::vector<Shape> shapes{Shape::Disk, Shape::Rectangle, Shape::Triangle};

    void validate() const;
    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct VideoSequence {
    SceneSpec spec;
    std::vector<RgbImage> frames;
    std::vector<LabelMap> gt;
    std::vector<std::size_t> annotated;

    std::size_t size() const { return frames.size(); }
    std::size_t num_objects() const { return spec.num_objects; }
    friend bool operator==(const VideoSequence&, const VideoSequence&) = default;
};

struct BoundingBox {
    double x0, y0, x1, y1;
    bool overlaps(const BoundingBox& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
};

/// Frame-by-frame generator; holds only the current motion state.
class VideoGenerator {
public:
    explicit VideoGenerator(const SceneSpec& spec);

    const SceneSpec& spec() const { return spec_; }
    std::size_t next_index() const { return t_; }
    bool done() const { return t_ >= spec_.frames; }

    /// Bounding boxes of every object at the frame next() will render.
    std::vector<BoundingBox> boxes() const;

    /// Renders the current frame and advances the motion state.
    void next(RgbImage& frame, LabelMap& gt);

private:
    struct Object {
        Shape shape;
        double cx, cy;        // current center
        double ox, oy;        // center at t = 0 (sinusoidal anchor)
        double vx, vy;
        double rx, ry;        // half extents
        double hue;
        double amp_x, amp_y, period, phase;
        double region_x0, region_x1;
        std::uint64_t texture_seed;
    };

    bool contains(const Object& o, double px, double py) const;
    void advance();

    SceneSpec spec_;
    std::vector<Object> objects_;
    double background_hue_ = 0.0;
    std::uint64_t background_seed_ = 0;
    std::size_t t_ = 0;
};

VideoSequence generate(const SceneSpec& spec);

/// Layout: frames/%06d.ppm, masks/%06d.pgm, meta.json.
void save_dataset(const VideoSequence& video, const std::filesystem::path& dir);
VideoSequence load_dataset(const std::filesystem::path& dir);

/// Generates straight to disk, one frame resident at a time.
void generate_to_dir(const SceneSpec& spec, const std::filesystem::path& dir);

std::filesystem::path frame_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path mask_path(const std::filesystem::path& dir, std::size_t index);

/// Lazy reader over a saved dataset.
class DatasetReader {
public:
    explicit DatasetReader(std::filesystem::path dir);

    const SceneSpec& spec() const { return spec_; }
    std::size_t size() const { return count_; }
    std::size_t num_objects() const { return spec_.num_objects; }
    const std::vector<std::size_t>& annotated() const { return annotated_; }
    RgbImage frame(std::size_t index) const;
    LabelMap mask(std::size_t index) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    SceneSpec spec_;
    std::vector<std::size_t> annotated_;
    std::size_t count_ = 0;
};

}  // namespace afb
