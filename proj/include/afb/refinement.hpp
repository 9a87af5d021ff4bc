#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "afb/numerics.hpp"
#include "afb/uncertainty.hpp"

namespace afb {

/// Per-pixel local features r(p).
struct PixelFeatures {
    Grid<Vec32> r;
};

/// Similarity head applied to (r(p), y_i(p)). Output is always in [-1, 1].
struct Scorer {
    enum class Kind { FixedCosine, TrainableAffine };

    Kind kind = Kind::FixedCosine;
    double w = 1.0;
    double b = 0.0;

    static Scorer fixed_cosine() { return {}; }
    static Scorer trainable(double w = 1.0, double b = 0.0) { return {Kind::TrainableAffine, w, b}; }

    /// Maps a cosine similarity to a score.
    double score(double cosine) const;
    std::string kind_name() const;
};

struct RefineConfig {
    std::size_t radius = 1;      // window is (2r+1)^2, clipped at borders
    double u_threshold = 0.7;    // refine only where U > threshold
    Scorer scorer;

    void validate() const;
};

/// Mask-weighted neighborhood means of r, one grid per object. Pixels whose
/// window carries less than 1e-8 total mask weight get a zero reference and
/// are flagged unsupported.
struct LocalReference {
    std::vector<Grid<Vec32>> refs;
    std::vector<Grid<std::uint8_t>> supported;
};

LocalReference local_reference(const std::vector<ScalarMap>& masks, const PixelFeatures& feats,
                               std::size_t radius);

/// Sliding-window maximum of each mask.
std::vector<ScalarMap> confidence_scores(const std::vector<ScalarMap>& masks, std::size_t radius);

struct RefineResult {
    std::vector<ScalarMap> scores;   // S = M + U e, unclamped
    std::vector<ScalarMap> masks;    // S clamped to [0, 1]
    LabelMap labels;                 // argmax of unclamped S, ties to the smaller index
    std::size_t refined_pixels = 0;
};

/// One refinement pass over pixels with U above the threshold.
RefineResult refine(const std::vector<ScalarMap>& masks, const UncertaintyMap& u,
                    const PixelFeatures& feats, const RefineConfig& cfg);

LabelMap argmax_labels(const std::vector<ScalarMap>& maps);

/// Training data for the trainable scorer: one refinement input plus labels.
struct RefineSample {
    std::vector<ScalarMap> masks;
    UncertaintyMap u;
    PixelFeatures feats;
    LabelMap labels;
};

struct ScorerGrad {
    double loss = 0.0;
    double dw = 0.0;
    double db = 0.0;
};

/// Mean total loss of the refined scores (used as logits) over the dataset,
/// with the gradient w.r.t. the affine scorer parameters.
ScorerGrad scorer_loss_with_grad(const std::vector<RefineSample>& data, const RefineConfig& cfg,
                                 double lambda_u);

struct TrainResult {
    Scorer scorer;
    std::vector<double> loss_curve;   // loss after initialization and after each accepted step
    std::size_t rejected_steps = 0;
};

/// Gradient descent on (w, b). A step that would raise the loss is rejected
/// and the step size halved. Throws "scorer not trainable" for fixed scorers.
TrainResult train_scorer(const std::vector<RefineSample>& data, const RefineConfig& cfg, double lambda_u,
                         std::size_t steps, double lr);

}  // namespace afb
