#pragma once

#include <cstddef>
#include <vector>

#include "afb/numerics.hpp"

namespace afb {

using ScalarMap = Grid<double>;

/// Per-object score maps. Index 0 is background; masks sum to 1 per pixel.
struct ScoreMaps {
    std::vector<ScalarMap> logits;
    std::vector<ScalarMap> masks;

    std::size_t objects() const { return masks.size(); }
    std::size_t height() const { return masks.empty() ? 0 : masks[0].height(); }
    std::size_t width() const { return masks.empty() ? 0 : masks[0].width(); }
};

struct UncertaintyMap {
    ScalarMap u;
};

/// Guard added to the runner-up likelihood before taking the ratio.
inline constexpr double kRatioGuard = 1e-12;

/// Default weight of the confidence term.
inline constexpr double kDefaultLambdaU = 0.5;

/// Largest and second-largest entries of one pixel; ties resolve to the
/// smaller index.
struct TopTwo {
    std::size_t first = 0;
    std::size_t second = 1;
    double m1 = 0.0;
    double m2 = 0.0;
};
TopTwo top_two(const std::vector<double>& values);

/// Per-pixel softmax across object maps. Needs at least two maps of one shape.
ScoreMaps normalize(std::vector<ScalarMap> logits);

/// U = exp(1 - M1 / (M2 + guard)) per pixel.
UncertaintyMap uncertainty_map(const ScoreMaps& maps);
UncertaintyMap uncertainty_map(const std::vector<ScalarMap>& masks);

/// Euclidean norm of U over all pixels.
double confidence_loss(const UncertaintyMap& u);
/// Norm divided by sqrt(pixel count); the form used inside total_loss.
double confidence_loss_rms(const UncertaintyMap& u);

/// Pixel-averaged -z_c + log sum_i exp(z_i).
double cross_entropy(const std::vector<ScalarMap>& logits, const LabelMap& labels);

struct LossGrad {
    double loss = 0.0;
    std::vector<ScalarMap> grad;   // d loss / d logits, same layout as the logits
};

LossGrad cross_entropy_with_grad(const std::vector<ScalarMap>& logits, const LabelMap& labels);
/// RMS confidence loss of softmax(logits) and its gradient w.r.t. the logits.
LossGrad confidence_loss_with_grad(const std::vector<ScalarMap>& logits);

struct TotalLoss {
    double loss = 0.0;
    double cls = 0.0;
    double conf = 0.0;
    std::vector<ScalarMap> grad;
};

/// L = L_cls + lambda_u * L_conf with the analytic gradient w.r.t. the logits.
TotalLoss total_loss(const std::vector<ScalarMap>& logits, const LabelMap& labels, double lambda_u);

}  // namespace afb
