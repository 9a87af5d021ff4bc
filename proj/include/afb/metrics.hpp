#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "afb/numerics.hpp"

namespace afb {

using BinaryMask = Grid<std::uint8_t>;

/// Mask of pixels carrying the given label.
BinaryMask object_mask(const LabelMap& labels, std::uint8_t object);

/// Intersection over union; 1 when both masks are empty.
double jaccard(const BinaryMask& pred, const BinaryMask& gt);

/// Foreground pixels with a 4-neighbour in the background. Pixels outside the
/// image do not count as background.
BinaryMask boundary(const BinaryMask& mask);

/// Boundary F-measure: a boundary pixel is matched if the other mask's boundary
/// has a pixel within Euclidean distance tolerance_px.
double boundary_f(const BinaryMask& pred, const BinaryMask& gt, std::size_t tolerance_px);

/// ceil(0.8% of the image diagonal).
std::size_t default_boundary_tolerance(std::size_t height, std::size_t width);

inline constexpr double kRecallThreshold = 0.5;

struct Aggregate {
    double mean = 0.0;
    double recall = 0.0;
    double decay = 0.0;
};

/// per_object[o][t] is object o's score at frame t. M averages per-object
/// means, R is the fraction of per-object means above tau, D is the mean of
/// the first temporal quartile minus that of the last.
Aggregate aggregate(const std::vector<std::vector<double>>& per_object, double tau = kRecallThreshold);

struct SequenceScores {
    std::vector<std::vector<double>> j;   // [object][frame]
    std::vector<std::vector<double>> f;
    Aggregate j_agg;
    Aggregate f_agg;
    double jf_mean = 0.0;

    nlohmann::json to_json() const;
};

/// Accumulates per-frame J and F over objects 1..L.
class SequenceEvaluator {
public:
    SequenceEvaluator(std::size_t num_objects, std::size_t tolerance_px);
    void add_frame(const LabelMap& pred, const LabelMap& gt);
    std::size_t frames() const { return frames_; }
    SequenceScores finish(double tau = kRecallThreshold) const;

private:
    std::size_t num_objects_;
    std::size_t tolerance_;
    std::size_t frames_ = 0;
    std::vector<std::vector<double>> j_;
    std::vector<std::vector<double>> f_;
};

}  // namespace afb
