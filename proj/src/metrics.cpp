#include "afb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace afb {

BinaryMask object_mask(const LabelMap& labels, std::uint8_t object) {
    BinaryMask m(labels.height(), labels.width(), 0);
    for (std::size_t p = 0; p < labels.size(); ++p) m[p] = labels[p] == object ? 1 : 0;
    return m;
}

double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("jaccard: shape mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < pred.size(); ++p) {
        const bool a = pred[p] != 0, b = gt[p] != 0;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask boundary(const BinaryMask& mask) {
    const std::size_t h = mask.height(), w = mask.width();
    BinaryMask out(h, w, 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask(y, x)) continue;
            const bool edge = (y > 0 && !mask(y - 1, x)) || (y + 1 < h && !mask(y + 1, x)) ||
                              (x > 0 && !mask(y, x - 1)) || (x + 1 < w && !mask(y, x + 1));
            out(y, x) = edge ? 1 : 0;
        }
    }
    return out;
}

namespace {

struct Point {
    long y, x;
};

std::vector<Point> points(const BinaryMask& m) {
    std::vector<Point> out;
    for (std::size_t y = 0; y < m.height(); ++y) {
        for (std::size_t x = 0; x < m.width(); ++x) {
            if (m(y, x)) out.push_back({static_cast<long>(y), static_cast<long>(x)});
        }
    }
    return out;
}

// Fraction of `from` points with a `to` point within the tolerance.
double matched_fraction(const std::vector<Point>& from, const std::vector<Point>& to, std::size_t tol) {
    const double tol2 = static_cast<double>(tol) * static_cast<double>(tol);
    std::size_t hit = 0;
    for (const Point& a : from) {
        for (const Point& b : to) {
            const double dy = static_cast<double>(a.y - b.y), dx = static_cast<double>(a.x - b.x);
            if (dy * dy + dx * dx <= tol2) {
                ++hit;
                break;
            }
        }
    }
    return static_cast<double>(hit) / static_cast<double>(from.size());
}

}  // namespace

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, std::size_t tolerance_px) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("boundary_f: shape mismatch");
    const auto pb = points(boundary(pred));
    const auto gb = points(boundary(gt));
    if (pb.empty() && gb.empty()) return 1.0;
    if (pb.empty() || gb.empty()) return 0.0;
    const double precision = matched_fraction(pb, gb, tolerance_px);
    const double recall = matched_fraction(gb, pb, tolerance_px);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

std::size_t default_boundary_tolerance(std::size_t height, std::size_t width) {
    const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
    return static_cast<std::size_t>(std::ceil(0.008 * diag));
}

Aggregate aggregate(const std::vector<std::vector<double>>& per_object, double tau) {
    if (per_object.empty()) throw std::invalid_argument("aggregate: no scores");
    Aggregate out;
    for (const auto& scores : per_object) {
        if (scores.empty()) throw std::invalid_argument("aggregate: empty score list");
        const double n = static_cast<double>(scores.size());
        const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
        const std::size_t q = (scores.size() + 3) / 4;
        const double first = std::accumulate(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(q), 0.0) /
                             static_cast<double>(q);
        const double last = std::accumulate(scores.end() - static_cast<std::ptrdiff_t>(q), scores.end(), 0.0) /
                            static_cast<double>(q);
        out.mean += mean;
        out.recall += mean > tau ? 1.0 : 0.0;
        out.decay += first - last;
    }
    const double objects = static_cast<double>(per_object.size());
    out.mean /= objects;
    out.recall /= objects;
    out.decay /= objects;
    return out;
}

nlohmann::json SequenceScores::to_json() const {
    auto agg = [](const Aggregate& a) { return nlohmann::json{{"M", a.mean}, {"R", a.recall}, {"D", a.decay}}; };
    nlohmann::json per_object = nlohmann::json::array();
    for (std::size_t o = 0; o < j.size(); ++o) {
        const Aggregate jo = aggregate({j[o]});
        const Aggregate fo = aggregate({f[o]});
        per_object.push_back({{"object", o + 1}, {"J", agg(jo)}, {"F", agg(fo)}, {"JF_M", 0.5 * (jo.mean + fo.mean)}});
    }
    return {{"J", agg(j_agg)}, {"F", agg(f_agg)}, {"JF_M", jf_mean}, {"frames", j.empty() ? 0 : j[0].size()},
            {"objects", per_object}};
}

SequenceEvaluator::SequenceEvaluator(std::size_t num_objects, std::size_t tolerance_px)
    : num_objects_(num_objects), tolerance_(tolerance_px), j_(num_objects), f_(num_objects) {
    if (num_objects == 0) throw std::invalid_argument("SequenceEvaluator: no objects");
}

void SequenceEvaluator::add_frame(const LabelMap& pred, const LabelMap& gt) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("prediction and ground truth differ in shape");
    for (std::size_t o = 0; o < num_objects_; ++o) {
        const auto label = static_cast<std::uint8_t>(o + 1);
        const BinaryMask pm = object_mask(pred, label);
        const BinaryMask gm = object_mask(gt, label);
        j_[o].push_back(jaccard(pm, gm));
        f_[o].push_back(boundary_f(pm, gm, tolerance_));
    }
    ++frames_;
}

SequenceScores SequenceEvaluator::finish(double tau) const {
    if (frames_ == 0) throw std::invalid_argument("SequenceEvaluator: no frames");
    SequenceScores s;
    s.j = j_;
    s.f = f_;
    s.j_agg = aggregate(j_, tau);
    s.f_agg = aggregate(f_, tau);
    s.jf_mean = 0.5 * (s.j_agg.mean + s.f_agg.mean);
    return s;
}

}  // namespace afb
