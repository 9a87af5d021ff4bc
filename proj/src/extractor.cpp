#include "afb/extractor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "afb/errors.hpp"
#include "afb/parallel.hpp"

namespace afb {

void ExtractorConfig::validate() const {
    if (stride < 1) throw ConfigError("stride must be at least 1");
    if (patch < 1) throw ConfigError("patch must be at least 1");
    if (d_k < 1 || d_v < 1) throw ConfigError("d_k and d_v must be positive");
    if (!(coverage_min > 0.0 && coverage_min <= 1.0)) throw ConfigError("coverage_min must be in (0,1]");
}

FrameAnalysis analyze(const RgbImage& frame) {
    if (frame.width == 0 || frame.height == 0 || frame.data.size() != frame.width * frame.height * 3)
        throw std::invalid_argument("degenerate frame");
    FrameAnalysis a;
    a.width = frame.width;
    a.height = frame.height;
    const std::size_t n = frame.width * frame.height;
    a.r.resize(n);
    a.g.resize(n);
    a.b.resize(n);
    std::vector<float> luma(n);
    for (std::size_t p = 0; p < n; ++p) {
        a.r[p] = frame.data[3 * p] / 255.0f;
        a.g[p] = frame.data[3 * p + 1] / 255.0f;
        a.b[p] = frame.data[3 * p + 2] / 255.0f;
        luma[p] = 0.299f * a.r[p] + 0.587f * a.g[p] + 0.114f * a.b[p];
    }
    a.magnitude.resize(n);
    a.orientation_bin.resize(n);
    const std::size_t w = frame.width, h = frame.height;
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t yu = y > 0 ? y - 1 : 0, yd = std::min(h - 1, y + 1);
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t xl = x > 0 ? x - 1 : 0, xr = std::min(w - 1, x + 1);
            const double gx = 0.5 * (luma[y * w + xr] - luma[y * w + xl]);
            const double gy = 0.5 * (luma[yd * w + x] - luma[yu * w + x]);
            a.magnitude[y * w + x] = static_cast<float>(std::hypot(gx, gy));
            const double angle = std::atan2(gy, gx) + std::numbers::pi;   // [0, 2pi]
            auto bin = static_cast<int>(std::floor(angle / (2.0 * std::numbers::pi) * 8.0));
            a.orientation_bin[y * w + x] = static_cast<std::uint8_t>(((bin % 8) + 8) % 8);
        }
    }
    return a;
}

CellGrid cell_grid(std::size_t height, std::size_t width, const ExtractorConfig& cfg) {
    if (height < cfg.patch || width < cfg.patch) throw std::invalid_argument("degenerate frame: smaller than patch");
    return {(height - cfg.patch) / cfg.stride + 1, (width - cfg.patch) / cfg.stride + 1, cfg.stride, cfg.patch};
}

Extractor::Extractor(const ExtractorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.proj_seed);
    Rng krng = rng.split(1);
    Rng vrng = rng.split(2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kDescriptorDim));
    key_proj_.resize(cfg_.d_k * kDescriptorDim);
    value_proj_.resize(cfg_.d_v * kDescriptorDim);
    for (double& v : key_proj_) v = krng.normal() * scale;
    for (double& v : value_proj_) v = vrng.normal() * scale;
}

std::vector<double> Extractor::descriptor(const FrameAnalysis& frame, const CellGrid& grid, std::size_t row,
                                          std::size_t col, const ScalarMap* mask) const {
    const std::size_t y0 = row * grid.stride, x0 = col * grid.stride;
    double sw = 0.0;
    double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
    double hist[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t y = y0; y < y0 + grid.patch; ++y) {
        for (std::size_t x = x0; x < x0 + grid.patch; ++x) {
            const double wgt = mask ? (*mask)(y, x) : 1.0;
            if (wgt <= 0.0) continue;
            const std::size_t p = y * frame.width + x;
            const double c[3] = {frame.r[p], frame.g[p], frame.b[p]};
            for (int k = 0; k < 3; ++k) {
                sum[k] += wgt * c[k];
                sq[k] += wgt * c[k] * c[k];
            }
            hist[frame.orientation_bin[p]] += wgt * frame.magnitude[p];
            sw += wgt;
        }
    }
    if (sw <= 0.0) return {};
    std::vector<double> d;
    d.reserve(kDescriptorDim);
    for (int k = 0; k < 3; ++k) d.push_back(cfg_.color_weight * (sum[k] / sw - 0.5));
    for (int k = 0; k < 3; ++k) {
        const double mean = sum[k] / sw;
        d.push_back(cfg_.spread_weight * std::sqrt(std::max(0.0, sq[k] / sw - mean * mean)));
    }
    for (double hb : hist) d.push_back(cfg_.gradient_weight * hb / sw);
    const double cy = static_cast<double>(y0) + grid.center_offset();
    const double cx = static_cast<double>(x0) + grid.center_offset();
    const double ny = frame.height > 1 ? 2.0 * cy / static_cast<double>(frame.height - 1) - 1.0 : 0.0;
    const double nx = frame.width > 1 ? 2.0 * cx / static_cast<double>(frame.width - 1) - 1.0 : 0.0;
    d.push_back(cfg_.position_weight * nx);
    d.push_back(cfg_.position_weight * ny);
    d.push_back(0.1);
    return d;
}

Feature Extractor::embed(const std::vector<double>& descriptor) const {
    if (descriptor.size() != kDescriptorDim) throw std::invalid_argument("embed: descriptor size");
    Feature f{Vec32(cfg_.d_k), Vec32(cfg_.d_v)};
    std::vector<double> key(cfg_.d_k, 0.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < cfg_.d_k; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < kDescriptorDim; ++j) s += key_proj_[i * kDescriptorDim + j] * descriptor[j];
        key[i] = s;
        sq += s * s;
    }
    // Unit RMS: |k|^2 = d_k.
    const double scale = sq > 0.0 ? std::sqrt(static_cast<double>(cfg_.d_k) / sq) : 0.0;
    for (std::size_t i = 0; i < cfg_.d_k; ++i) f.key[i] = static_cast<float>(key[i] * scale);
    std::vector<double> value(cfg_.d_v, 0.0);
    double vsq = 0.0;
    for (std::size_t i = 0; i < cfg_.d_v; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < kDescriptorDim; ++j) s += value_proj_[i * kDescriptorDim + j] * descriptor[j];
        value[i] = s;
        vsq += s * s;
    }
    // Equal value norms keep the cosine decode from favouring bright objects at mixed cells.
    const double vscale = vsq > 0.0 ? std::sqrt(static_cast<double>(cfg_.d_v) / vsq) : 0.0;
    for (std::size_t i = 0; i < cfg_.d_v; ++i) f.value[i] = static_cast<float>(value[i] * vscale);
    return f;
}

Extractor::Query Extractor::extract_query(const FrameAnalysis& frame) const {
    Query q;
    q.grid = cell_grid(frame.height, frame.width, cfg_);
    q.features.keys = Grid<Vec32>(q.grid.rows, q.grid.cols);
    q.features.values = Grid<Vec32>(q.grid.rows, q.grid.cols);
    parallel_for(q.grid.rows, [&](std::size_t row) {
        for (std::size_t col = 0; col < q.grid.cols; ++col) {
            Feature f = embed(descriptor(frame, q.grid, row, col, nullptr));
            q.features.keys(row, col) = std::move(f.key);
            q.features.values(row, col) = std::move(f.value);
        }
    });

    const std::size_t h = frame.height, w = frame.width;
    q.pixels.r = Grid<Vec32>(h, w);
    const double pw = cfg_.pixel_position_weight;
    // Colors are centered on the frame mean so cosines against a local
    // reference contrast foreground with background rather than with grey.
    double mean[3] = {0.0, 0.0, 0.0};
    for (std::size_t p = 0; p < h * w; ++p) {
        mean[0] += frame.r[p];
        mean[1] += frame.g[p];
        mean[2] += frame.b[p];
    }
    const auto mr = static_cast<float>(mean[0] / static_cast<double>(h * w));
    const auto mg = static_cast<float>(mean[1] / static_cast<double>(h * w));
    const auto mb = static_cast<float>(mean[2] / static_cast<double>(h * w));
    parallel_for(h, [&](std::size_t y) {
        const double ny = h > 1 ? 2.0 * static_cast<double>(y) / static_cast<double>(h - 1) - 1.0 : 0.0;
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t p = y * w + x;
            const double nx = w > 1 ? 2.0 * static_cast<double>(x) / static_cast<double>(w - 1) - 1.0 : 0.0;
            q.pixels.r(y, x) = Vec32{2.0f * (frame.r[p] - mr), 2.0f * (frame.g[p] - mg), 2.0f * (frame.b[p] - mb),
                                     static_cast<float>(cfg_.pixel_gradient_weight * frame.magnitude[p]), static_cast<float>(pw * nx),
                                     static_cast<float>(pw * ny)};
        }
    });
    return q;
}

std::vector<Feature> Extractor::extract_reference(const FrameAnalysis& frame, const ScalarMap& mask) const {
    if (mask.height() != frame.height || mask.width() != frame.width)
        throw std::invalid_argument("extract_reference: mask shape differs from frame");
    const CellGrid grid = cell_grid(frame.height, frame.width, cfg_);
    const double area = static_cast<double>(grid.patch * grid.patch);
    std::vector<std::vector<Feature>> rows(grid.rows);
    parallel_for(grid.rows, [&](std::size_t row) {
        for (std::size_t col = 0; col < grid.cols; ++col) {
            double coverage = 0.0;
            for (std::size_t y = row * grid.stride; y < row * grid.stride + grid.patch; ++y) {
                for (std::size_t x = col * grid.stride; x < col * grid.stride + grid.patch; ++x) coverage += mask(y, x);
            }
            if (coverage / area < cfg_.coverage_min) continue;
            rows[row].push_back(embed(descriptor(frame, grid, row, col, &mask)));
        }
    });
    std::vector<Feature> out;
    for (auto& r : rows) {
        for (auto& f : r) out.push_back(std::move(f));
    }
    return out;
}

ScoreMaps decode(const std::vector<MatchResult>& matches, const CellGrid& grid, std::size_t height,
                 std::size_t width, double tau_d) {
    if (matches.size() < 2) throw std::invalid_argument("decode: need background and at least one object");
    std::vector<ScalarMap> logits;
    logits.reserve(matches.size());
    for (const MatchResult& m : matches) {
        if (m.concat.height() != grid.rows || m.concat.width() != grid.cols)
            throw std::invalid_argument("decode: match grid differs from cell grid");
        Grid<float> cell(grid.rows, grid.cols);
        for (std::size_t c = 0; c < cell.size(); ++c) {
            const Vec32& cat = m.concat[c];
            const std::size_t half = cat.size() / 2;
            const std::span<const float> query(cat.data(), half);
            const std::span<const float> retrieved(cat.data() + half, half);
            cell[c] = static_cast<float>(tau_d * cosine_or_zero(query, retrieved));
        }
        const Grid<float> up =
            lattice_resample(cell, height, width, grid.center_offset(), static_cast<double>(grid.stride));
        ScalarMap map(height, width);
        for (std::size_t p = 0; p < map.size(); ++p) map[p] = up[p];
        logits.push_back(std::move(map));
    }
    return normalize(std::move(logits));
}

}  // namespace afb
