#include "afb/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "afb/errors.hpp"
#include "afb/parallel.hpp"

namespace afb {

double Scorer::score(double cosine) const {
    if (kind == Kind::FixedCosine) return std::clamp(cosine, -1.0, 1.0);
    return std::tanh(w * cosine + b);
}

std::string Scorer::kind_name() const {
    return kind == Kind::FixedCosine ? "fixed-cosine" : "trainable-affine";
}

void RefineConfig::validate() const {
    if (radius < 1) throw ConfigError("radius must be at least 1");
    if (!(u_threshold >= 0.0 && u_threshold <= 1.0)) throw ConfigError("u_threshold must be in [0,1]");
}

namespace {

constexpr double kSupportFloor = 1e-8;

void check_inputs(const std::vector<ScalarMap>& masks, const PixelFeatures& feats) {
    if (masks.empty()) throw std::invalid_argument("refinement needs object masks");
    for (const auto& m : masks) {
        if (!m.same_shape(masks[0])) throw std::invalid_argument("object masks differ in shape");
    }
    if (!feats.r.same_shape(masks[0])) throw std::invalid_argument("pixel features and masks differ in shape");
}

struct Window {
    std::size_t y0, y1, x0, x1;   // inclusive bounds
};

Window window_at(std::size_t y, std::size_t x, std::size_t radius, std::size_t h, std::size_t w) {
    return {y >= radius ? y - radius : 0, std::min(h - 1, y + radius), x >= radius ? x - radius : 0,
            std::min(w - 1, x + radius)};
}

// Mask-weighted mean of r over the window; returns false when unsupported.
bool reference_at(const ScalarMap& mask, const Grid<Vec32>& r, const Window& win, Vec32& out) {
    const std::size_t dim = r[0].size();
    std::vector<double> acc(dim, 0.0);
    double total = 0.0;
    for (std::size_t y = win.y0; y <= win.y1; ++y) {
        for (std::size_t x = win.x0; x <= win.x1; ++x) {
            const double m = mask(y, x);
            total += m;
            const Vec32& f = r(y, x);
            for (std::size_t d = 0; d < dim; ++d) acc[d] += m * f[d];
        }
    }
    out.assign(dim, 0.0f);
    if (total < kSupportFloor) return false;
    for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] / total);
    return true;
}

double window_max(const ScalarMap& mask, const Window& win) {
    double mx = mask(win.y0, win.x0);
    for (std::size_t y = win.y0; y <= win.y1; ++y) {
        for (std::size_t x = win.x0; x <= win.x1; ++x) mx = std::max(mx, mask(y, x));
    }
    return mx;
}

// Cached per-(pixel, object) terms: S = M + gain * score(cos).
struct RefineTerm {
    std::size_t pixel;
    std::size_t object;
    double gain;     // U(p) * c_i(p)
    double cosine;
};

std::vector<RefineTerm> refine_terms(const std::vector<ScalarMap>& masks, const UncertaintyMap& u,
                                     const PixelFeatures& feats, const RefineConfig& cfg) {
    check_inputs(masks, feats);
    if (!u.u.same_shape(masks[0])) throw std::invalid_argument("uncertainty map and masks differ in shape");
    const std::size_t h = masks[0].height();
    const std::size_t w = masks[0].width();
    std::vector<std::vector<RefineTerm>> rows(h);
    parallel_for(h, [&](std::size_t y) {
        Vec32 ref;
        for (std::size_t x = 0; x < w; ++x) {
            const double uv = u.u(y, x);
            if (!(uv > cfg.u_threshold)) continue;
            const Window win = window_at(y, x, cfg.radius, h, w);
            for (std::size_t i = 0; i < masks.size(); ++i) {
                if (!reference_at(masks[i], feats.r, win, ref)) continue;
                const double c = window_max(masks[i], win);
                rows[y].push_back({y * w + x, i, uv * c, cosine_or_zero(feats.r(y, x), ref)});
            }
        }
    });
    std::vector<RefineTerm> terms;
    for (auto& row : rows) terms.insert(terms.end(), row.begin(), row.end());
    return terms;
}

std::vector<ScalarMap> apply_terms(const std::vector<ScalarMap>& masks, const std::vector<RefineTerm>& terms,
                                   const Scorer& scorer) {
    std::vector<ScalarMap> s = masks;
    for (const RefineTerm& t : terms) s[t.object][t.pixel] += t.gain * scorer.score(t.cosine);
    return s;
}

}  // namespace

LocalReference local_reference(const std::vector<ScalarMap>& masks, const PixelFeatures& feats,
                               std::size_t radius) {
    check_inputs(masks, feats);
    const std::size_t h = masks[0].height();
    const std::size_t w = masks[0].width();
    LocalReference out;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        Grid<Vec32> refs(h, w);
        Grid<std::uint8_t> supported(h, w, 0);
        parallel_for(h, [&](std::size_t y) {
            for (std::size_t x = 0; x < w; ++x) {
                supported(y, x) = reference_at(masks[i], feats.r, window_at(y, x, radius, h, w), refs(y, x)) ? 1 : 0;
            }
        });
        out.refs.push_back(std::move(refs));
        out.supported.push_back(std::move(supported));
    }
    return out;
}

std::vector<ScalarMap> confidence_scores(const std::vector<ScalarMap>& masks, std::size_t radius) {
    std::vector<ScalarMap> out;
    out.reserve(masks.size());
    for (const ScalarMap& m : masks) {
        const std::size_t h = m.height();
        const std::size_t w = m.width();
        // Separable: row maxima, then column maxima of those.
        ScalarMap rows(h, w);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t x0 = x >= radius ? x - radius : 0;
                const std::size_t x1 = std::min(w - 1, x + radius);
                double mx = m(y, x0);
                for (std::size_t k = x0 + 1; k <= x1; ++k) mx = std::max(mx, m(y, k));
                rows(y, x) = mx;
            }
        }
        ScalarMap c(h, w);
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t y0 = y >= radius ? y - radius : 0;
            const std::size_t y1 = std::min(h - 1, y + radius);
            for (std::size_t x = 0; x < w; ++x) {
                double mx = rows(y0, x);
                for (std::size_t k = y0 + 1; k <= y1; ++k) mx = std::max(mx, rows(k, x));
                c(y, x) = mx;
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

LabelMap argmax_labels(const std::vector<ScalarMap>& maps) {
    if (maps.empty()) throw std::invalid_argument("argmax_labels: no maps");
    LabelMap labels(maps[0].height(), maps[0].width(), 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < maps.size(); ++i) {
            if (maps[i][p] > maps[best][p]) best = i;
        }
        labels[p] = static_cast<std::uint8_t>(best);
    }
    return labels;
}

RefineResult refine(const std::vector<ScalarMap>& masks, const UncertaintyMap& u, const PixelFeatures& feats,
                    const RefineConfig& cfg) {
    cfg.validate();
    const auto terms = refine_terms(masks, u, feats, cfg);
    RefineResult out;
    out.scores = apply_terms(masks, terms, cfg.scorer);
    out.labels = argmax_labels(out.scores);
    out.masks = out.scores;
    for (auto& m : out.masks) {
        for (double& v : m.cells()) v = std::clamp(v, 0.0, 1.0);
    }
    for (std::size_t p = 0; p < u.u.size(); ++p) {
        if (u.u[p] > cfg.u_threshold) ++out.refined_pixels;
    }
    return out;
}

namespace {

struct PreparedSample {
    const RefineSample* sample;
    std::vector<RefineTerm> terms;
};

std::vector<PreparedSample> prepare(const std::vector<RefineSample>& data, const RefineConfig& cfg) {
    std::vector<PreparedSample> prepared;
    prepared.reserve(data.size());
    for (const RefineSample& s : data) prepared.push_back({&s, refine_terms(s.masks, s.u, s.feats, cfg)});
    return prepared;
}

ScorerGrad evaluate(const std::vector<PreparedSample>& prepared, const Scorer& scorer, double lambda_u) {
    ScorerGrad g;
    for (const PreparedSample& ps : prepared) {
        const auto scores = apply_terms(ps.sample->masks, ps.terms, scorer);
        const TotalLoss loss = total_loss(scores, ps.sample->labels, lambda_u);
        g.loss += loss.loss;
        for (const RefineTerm& t : ps.terms) {
            const double th = std::tanh(scorer.w * t.cosine + scorer.b);
            const double d_score = t.gain * (1.0 - th * th);
            const double upstream = loss.grad[t.object][t.pixel];
            g.dw += upstream * d_score * t.cosine;
            g.db += upstream * d_score;
        }
    }
    const double n = static_cast<double>(prepared.size());
    g.loss /= n;
    g.dw /= n;
    g.db /= n;
    return g;
}

}  // namespace

ScorerGrad scorer_loss_with_grad(const std::vector<RefineSample>& data, const RefineConfig& cfg,
                                 double lambda_u) {
    if (cfg.scorer.kind != Scorer::Kind::TrainableAffine) throw std::invalid_argument("scorer not trainable");
    if (data.empty()) throw std::invalid_argument("scorer training needs a nonempty dataset");
    cfg.validate();
    return evaluate(prepare(data, cfg), cfg.scorer, lambda_u);
}

TrainResult train_scorer(const std::vector<RefineSample>& data, const RefineConfig& cfg, double lambda_u,
                         std::size_t steps, double lr) {
    if (cfg.scorer.kind != Scorer::Kind::TrainableAffine) throw std::invalid_argument("scorer not trainable");
    if (data.empty()) throw std::invalid_argument("scorer training needs a nonempty dataset");
    if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
    cfg.validate();

    constexpr int kMaxHalvings = 40;
    const auto prepared = prepare(data, cfg);
    TrainResult result;
    result.scorer = cfg.scorer;
    ScorerGrad current = evaluate(prepared, result.scorer, lambda_u);
    result.loss_curve.push_back(current.loss);
    double step = lr;
    for (std::size_t it = 0; it < steps; ++it) {
        bool accepted = false;
        for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
            Scorer trial = result.scorer;
            trial.w -= step * current.dw;
            trial.b -= step * current.db;
            const ScorerGrad next = evaluate(prepared, trial, lambda_u);
            if (next.loss <= current.loss) {
                result.scorer = trial;
                current = next;
                accepted = true;
                break;
            }
            ++result.rejected_steps;
            step *= 0.5;
        }
        if (!accepted) break;
        result.loss_curve.push_back(current.loss);
    }
    return result;
}

}  // namespace afb
