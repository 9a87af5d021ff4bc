#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace afb {

/// Dense float vector used for keys, values and pixel features.
using Vec32 = std::vector<float>;

/// Row-major 2D grid of cells.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, const T& fill = T{})
        : height_(height), width_(width), cells_(height * width, fill) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    T& operator()(std::size_t y, std::size_t x) { return cells_[y * width_ + x]; }
    const T& operator()(std::size_t y, std::size_t x) const { return cells_[y * width_ + x]; }
    T& operator[](std::size_t i) { return cells_[i]; }
    const T& operator[](std::size_t i) const { return cells_[i]; }

    std::vector<T>& cells() { return cells_; }
    const std::vector<T>& cells() const { return cells_; }

    bool same_shape(const Grid& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }
    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return height_ == other.height() && width_ == other.width();
    }

    friend bool operator==(const Grid& a, const Grid& b) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> cells_;
};

/// Per-pixel object index, 0 = background.
using LabelMap = Grid<std::uint8_t>;

double dot(const float* a, const float* b, std::size_t n);
double dot(std::span<const float> a, std::span<const float> b);
double norm(std::span<const float> a);

/// Numerically stabilized softmax. Throws std::invalid_argument("empty softmax").
Vec32 softmax(std::span<const float> scores);
/// Softmax in double precision, for loss and gradient code.
std::vector<double> softmax(std::span<const double> scores);

/// Normalized inner product. Throws on dimension mismatch or a zero-norm input.
double cosine(std::span<const float> a, std::span<const float> b);
/// Like cosine(), but returns 0 when either input has zero norm.
double cosine_or_zero(std::span<const float> a, std::span<const float> b);

/// Corner-aligned bilinear interpolation of a scalar grid.
Grid<float> bilinear_upsample(const Grid<float>& src, std::size_t out_h, std::size_t out_w);
/// Corner-aligned bilinear interpolation of a vector-valued grid.
Grid<Vec32> bilinear_upsample(const Grid<Vec32>& src, std::size_t out_h, std::size_t out_w);

/// Bilinear resampling where output index o reads source coordinate
/// (o - offset) / scale, clamped to the source extent. Used to place a coarse
/// lattice whose cell centers sit at pixel offset + scale * index.
Grid<float> lattice_resample(const Grid<float>& src, std::size_t out_h, std::size_t out_w, double offset,
                             double scale);

/// Counter-based generator (SplitMix64 over a 64-bit counter). Equal seeds give
/// equal streams; split() derives independent child streams deterministically.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller.
    double normal();
    Rng split(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace afb
