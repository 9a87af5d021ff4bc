#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "afb/extractor.hpp"
#include "afb/feature_bank.hpp"
#include "afb/memory_policy.hpp"
#include "afb/refinement.hpp"
#include "afb/synthgen.hpp"
#include "afb/uncertainty.hpp"

namespace afb {

struct PipelineConfig {
    BankConfig bank;
    RefineConfig refine;
    ExtractorConfig extractor;
    double lambda_u = kDefaultLambdaU;
    double tau_d = 10.0;
    MemoryPolicy policy = MemoryPolicy::Afb;
    std::size_t absorb_interval = 1;
    bool absorb_ground_truth = false;
    std::size_t absorb_margin = 3;   // only absorb pixels this far inside a predicted region

    /// Validates sub-configs; bank dims must match the extractor's d_k / d_v.
    void validate() const;
};

struct FrameResult {
    std::size_t frame = 0;
    std::vector<ScalarMap> masks;   // refined scores clamped to [0, 1]
    LabelMap labels;
    double mean_u = 0.0;
    double max_u = 0.0;
    std::size_t refined_pixels = 0;
    std::vector<MemoryStats> bank_stats;   // per object, background first
    double runtime_ms = 0.0;

    /// One stats line; runtime is omitted when include_timing is false.
    nlohmann::json stats_json(bool include_timing) const;
};

/// Intermediate maps of one frame, kept for scorer training.
struct FrameIntermediates {
    std::vector<ScalarMap> masks;
    UncertaintyMap u;
    PixelFeatures feats;
};

/// Frame-by-frame segmentation loop over one video: match every object's
/// memory, decode, estimate uncertainty, refine, then absorb the new frame.
class Segmenter {
public:
    Segmenter(const PipelineConfig& cfg, std::size_t num_objects);

    /// Builds one memory per object (background = 0) from the annotated first frame.
    void init(const RgbImage& frame, const LabelMap& labels);

    /// Segments the next frame. When absorb_ground_truth is set, `gt` must be
    /// supplied and is absorbed instead of the prediction.
    FrameResult step(const RgbImage& frame, const LabelMap* gt = nullptr,
                     FrameIntermediates* intermediates = nullptr);

    const std::vector<ObjectMemory>& memories() const { return memories_; }
    std::size_t stored_features() const;
    std::size_t next_frame() const { return next_frame_; }
    const PipelineConfig& config() const { return cfg_; }

private:
    void absorb(const FrameAnalysis& frame, const LabelMap& labels, std::uint64_t index);

    PipelineConfig cfg_;
    std::size_t num_objects_;
    Extractor extractor_;
    std::vector<ObjectMemory> memories_;
    std::size_t next_frame_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
};

/// Runs the whole video; frame 0 must carry the annotation. Returns results
/// for frames 1..T-1.
std::vector<FrameResult> segment_video(const VideoSequence& video, const PipelineConfig& cfg);

/// Soft 0/1 mask of one label.
ScalarMap label_weights(const LabelMap& labels, std::uint8_t object);

/// Labels with every pixel within `margin` (Chebyshev) of a label change set
/// to kUnlabeled, so absorption never reads a region's uncertain rim.
inline constexpr std::uint8_t kUnlabeled = 255;
LabelMap erode_labels(const LabelMap& labels, std::size_t margin);

}  // namespace afb
