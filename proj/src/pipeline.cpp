#include "afb/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "afb/errors.hpp"
#include "afb/matcher.hpp"

namespace afb {

void PipelineConfig::validate() const {
    bank.validate();
    refine.validate();
    extractor.validate();
    if (bank.key_dim != extractor.d_k || bank.value_dim != extractor.d_v)
        throw ConfigError("bank dimensions must match extractor d_k/d_v");
    if (!(tau_d > 0.0)) throw ConfigError("tau_d must be positive");
    if (!(lambda_u >= 0.0)) throw ConfigError("lambda_u must be nonnegative");
    if (absorb_interval < 1) throw ConfigError("absorb_interval must be at least 1");
}

nlohmann::json FrameResult::stats_json(bool include_timing) const {
    nlohmann::json sizes = nlohmann::json::array(), merges = nlohmann::json::array(),
                   appends = nlohmann::json::array(), evictions = nlohmann::json::array();
    for (const MemoryStats& s : bank_stats) {
        sizes.push_back(s.size);
        merges.push_back(s.merges);
        appends.push_back(s.appends);
        evictions.push_back(s.evictions);
    }
    nlohmann::json j{{"frame", frame},         {"per_object_bank_size", sizes}, {"merges", merges},
                     {"appends", appends},     {"evictions", evictions},        {"mean_u", mean_u},
                     {"max_u", max_u},         {"refined_pixels", refined_pixels}};
    if (include_timing) j["runtime_ms"] = runtime_ms;
    return j;
}

ScalarMap label_weights(const LabelMap& labels, std::uint8_t object) {
    ScalarMap m(labels.height(), labels.width(), 0.0);
    for (std::size_t p = 0; p < labels.size(); ++p) m[p] = labels[p] == object ? 1.0 : 0.0;
    return m;
}

LabelMap erode_labels(const LabelMap& labels, std::size_t margin) {
    if (margin == 0) return labels;
    const std::size_t h = labels.height(), w = labels.width();
    // Row pass then column pass: a pixel survives if its window holds one label.
    Grid<std::uint8_t> row_uniform(h, w, 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t x0 = x >= margin ? x - margin : 0, x1 = std::min(w - 1, x + margin);
            bool same = true;
            for (std::size_t q = x0; q <= x1 && same; ++q) same = labels(y, q) == labels(y, x);
            row_uniform(y, x) = same ? 1 : 0;
        }
    }
    LabelMap out(h, w, kUnlabeled);
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t y0 = y >= margin ? y - margin : 0, y1 = std::min(h - 1, y + margin);
        for (std::size_t x = 0; x < w; ++x) {
            bool keep = true;
            for (std::size_t q = y0; q <= y1 && keep; ++q) keep = row_uniform(q, x) && labels(q, x) == labels(y, x);
            if (keep) out(y, x) = labels(y, x);
        }
    }
    return out;
}

Segmenter::Segmenter(const PipelineConfig& cfg, std::size_t num_objects)
    : cfg_(cfg), num_objects_(num_objects), extractor_(cfg.extractor) {
    cfg_.validate();
    if (num_objects_ < 1) throw std::invalid_argument("need at least one object");
}

void Segmenter::init(const RgbImage& frame, const LabelMap& labels) {
    if (labels.height() != frame.height || labels.width() != frame.width)
        throw std::invalid_argument("annotation and frame differ in shape");
    height_ = frame.height;
    width_ = frame.width;
    const FrameAnalysis analysis = analyze(frame);
    memories_.clear();
    for (std::size_t i = 0; i <= num_objects_; ++i) {
        const auto features = extractor_.extract_reference(analysis, label_weights(labels, static_cast<std::uint8_t>(i)));
        if (features.empty()) {
            throw std::invalid_argument("first-frame annotation has no usable region for object " + std::to_string(i));
        }
        memories_.emplace_back(cfg_.policy, cfg_.bank, features, 0);
    }
    next_frame_ = 1;
}

void Segmenter::absorb(const FrameAnalysis& frame, const LabelMap& labels, std::uint64_t index) {
    // Only pixels safely inside a predicted region are encoded, so boundary
    // errors never feed back into the memory.
    const LabelMap core = erode_labels(labels, cfg_.absorb_margin);
    for (std::size_t i = 0; i <= num_objects_; ++i) {
        const auto features = extractor_.extract_reference(frame, label_weights(core, static_cast<std::uint8_t>(i)));
        memories_[i].update(features, index);
    }
}

FrameResult Segmenter::step(const RgbImage& frame, const LabelMap* gt, FrameIntermediates* intermediates) {
    if (memories_.empty()) throw std::logic_error("Segmenter::step before init");
    if (frame.height != height_ || frame.width != width_) throw std::invalid_argument("frame size changed mid-video");
    if (cfg_.absorb_ground_truth && gt == nullptr) throw std::invalid_argument("ground-truth absorption needs labels");
    const auto start = std::chrono::steady_clock::now();

    const FrameAnalysis analysis = analyze(frame);
    const Extractor::Query query = extractor_.extract_query(analysis);
    std::vector<MatchResult> matches;
    matches.reserve(memories_.size());
    for (ObjectMemory& memory : memories_) {
        matches.push_back(match(query.features, memory.entries(), cfg_.bank.epsilon_l));
        memory.record_usage(matches.back().usage_counts);
    }
    const ScoreMaps initial = decode(matches, query.grid, height_, width_, cfg_.tau_d);
    UncertaintyMap u = uncertainty_map(initial);
    RefineResult refined = refine(initial.masks, u, query.pixels, cfg_.refine);

    FrameResult result;
    result.frame = next_frame_;
    result.refined_pixels = refined.refined_pixels;
    double total_u = 0.0;
    for (double v : u.u.cells()) {
        total_u += v;
        result.max_u = std::max(result.max_u, v);
    }
    result.mean_u = total_u / static_cast<double>(u.u.size());
    result.labels = std::move(refined.labels);
    result.masks = std::move(refined.masks);

    if (next_frame_ % cfg_.absorb_interval == 0) {
        absorb(analysis, cfg_.absorb_ground_truth ? *gt : result.labels, next_frame_);
    }
    for (const ObjectMemory& memory : memories_) result.bank_stats.push_back(memory.stats());

    if (intermediates) {
        intermediates->masks = initial.masks;
        intermediates->u = std::move(u);
        intermediates->feats = query.pixels;
    }
    ++next_frame_;
    result.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::size_t Segmenter::stored_features() const {
    std::size_t total = 0;
    for (const ObjectMemory& m : memories_) total += m.size();
    return total;
}

std::vector<FrameResult> segment_video(const VideoSequence& video, const PipelineConfig& cfg) {
    if (video.frames.empty() || video.gt.empty()) throw std::invalid_argument("first-frame annotation missing");
    if (video.frames.size() != video.gt.size()) throw std::invalid_argument("annotation/frame count mismatch");
    Segmenter seg(cfg, video.num_objects());
    seg.init(video.frames[0], video.gt[0]);
    std::vector<FrameResult> results;
    for (std::size_t t = 1; t < video.frames.size(); ++t) results.push_back(seg.step(video.frames[t], &video.gt[t]));
    return results;
}

}  // namespace afb
