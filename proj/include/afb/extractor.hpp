#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "afb/feature_bank.hpp"
#include "afb/image.hpp"
#include "afb/matcher.hpp"
#include "afb/refinement.hpp"
#include "afb/uncertainty.hpp"

namespace afb {

/// Deterministic stand-in for the query/reference encoders and the key/value
/// embedding. Each lattice cell is summarized by a hand-built descriptor,
/// then mapped to key and value spaces with fixed random projections.
struct ExtractorConfig {
    std::size_t stride = 4;
    std::size_t patch = 8;
    std::size_t d_k = 32;
    std::size_t d_v = 32;
    std::uint64_t proj_seed = 0x5eed;
    double coverage_min = 0.25;
    double color_weight = 2.0;           // descriptor mean-color term
    double spread_weight = 1.0;          // descriptor color-std term
    double gradient_weight = 1.0;        // descriptor orientation-histogram term
    double position_weight = 0.5;        // descriptor position term
    double pixel_gradient_weight = 1.0;  // r(p) gradient-magnitude term
    double pixel_position_weight = 0.2;  // r(p) position term

    void validate() const;
};

/// Descriptor layout: mean RGB (3), RGB std (3), 8-bin gradient-orientation
/// histogram, normalized position (2), constant bias (1).
inline constexpr std::size_t kDescriptorDim = 17;
/// r(p) = [R, G, B (centered on the frame mean), gradient magnitude, x, y].
inline constexpr std::size_t kPixelFeatureDim = 6;

/// Per-pixel color and gradient planes of one frame, shared by the query and
/// every reference extraction of that frame.
struct FrameAnalysis {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> r, g, b;
    std::vector<float> magnitude;
    std::vector<std::uint8_t> orientation_bin;
};

FrameAnalysis analyze(const RgbImage& frame);

/// Lattice geometry for a frame size.
struct CellGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t stride = 1;
    std::size_t patch = 1;
    double center_offset() const { return (static_cast<double>(patch) - 1.0) / 2.0; }
};

CellGrid cell_grid(std::size_t height, std::size_t width, const ExtractorConfig& cfg);

class Extractor {
public:
    explicit Extractor(const ExtractorConfig& cfg);

    const ExtractorConfig& config() const { return cfg_; }

    struct Query {
        QueryFeatures features;
        PixelFeatures pixels;
        CellGrid grid;
    };

    Query extract_query(const FrameAnalysis& frame) const;
    Query extract_query(const RgbImage& frame) const { return extract_query(analyze(frame)); }

    /// Features of cells whose mask coverage is at least coverage_min, with the
    /// descriptor computed over mask-weighted pixels only.
    std::vector<Feature> extract_reference(const FrameAnalysis& frame, const ScalarMap& mask) const;
    std::vector<Feature> extract_reference(const RgbImage& frame, const ScalarMap& mask) const {
        return extract_reference(analyze(frame), mask);
    }

    /// Raw descriptor of one cell, weighted by mask (nullptr = all ones).
    std::vector<double> descriptor(const FrameAnalysis& frame, const CellGrid& grid, std::size_t row,
                                   std::size_t col, const ScalarMap* mask) const;
    Feature embed(const std::vector<double>& descriptor) const;

private:
    ExtractorConfig cfg_;
    std::vector<double> key_proj_;     // d_k x kDescriptorDim
    std::vector<double> value_proj_;   // d_v x kDescriptorDim
};

/// Per-object cosine similarity between the query value and the retrieved
/// value (the two halves of MatchResult::concat), scaled by tau_d, resampled
/// from cell centers to pixel resolution and softmax-normalized across objects.
ScoreMaps decode(const std::vector<MatchResult>& matches, const CellGrid& grid, std::size_t height,
                 std::size_t width, double tau_d);

}  // namespace afb
