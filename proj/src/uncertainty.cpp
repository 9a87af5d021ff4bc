#include "afb/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afb {

namespace {

void check_maps(const std::vector<ScalarMap>& maps) {
    if (maps.size() < 2) throw std::invalid_argument("need at least two object maps");
    for (const auto& m : maps) {
        if (!m.same_shape(maps[0])) throw std::invalid_argument("object maps differ in shape");
    }
}

void check_labels(const std::vector<ScalarMap>& logits, const LabelMap& labels) {
    check_maps(logits);
    if (!labels.same_shape(logits[0])) throw std::invalid_argument("labels and logits differ in shape");
    for (auto c : labels.cells()) {
        if (c >= logits.size()) throw std::invalid_argument("label out of range");
    }
}

std::vector<double> pixel(const std::vector<ScalarMap>& maps, std::size_t p) {
    std::vector<double> v(maps.size());
    for (std::size_t i = 0; i < maps.size(); ++i) v[i] = maps[i][p];
    return v;
}

std::vector<ScalarMap> zeros_like(const std::vector<ScalarMap>& maps) {
    std::vector<ScalarMap> out;
    out.reserve(maps.size());
    for (const auto& m : maps) out.emplace_back(m.height(), m.width(), 0.0);
    return out;
}

// The guard would put an exact tie a hair above 1; clamping keeps U in (0, 1]
// with U = 1 exactly at ties.
double raw_uncertainty(const TopTwo& t) { return std::exp(1.0 - t.m1 / (t.m2 + kRatioGuard)); }
double uncertainty_of(const TopTwo& t) { return std::min(1.0, raw_uncertainty(t)); }

}  // namespace

TopTwo top_two(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("top_two: need at least two values");
    TopTwo t;
    t.first = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[t.first]) t.first = i;
    }
    t.second = t.first == 0 ? 1 : 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != t.first && values[i] > values[t.second]) t.second = i;
    }
    t.m1 = values[t.first];
    t.m2 = values[t.second];
    return t;
}

ScoreMaps normalize(std::vector<ScalarMap> logits) {
    check_maps(logits);
    ScoreMaps out;
    out.masks = zeros_like(logits);
    const std::size_t n = logits[0].size();
    for (std::size_t p = 0; p < n; ++p) {
        const auto m = softmax(std::span<const double>(pixel(logits, p)));
        for (std::size_t i = 0; i < m.size(); ++i) out.masks[i][p] = m[i];
    }
    out.logits = std::move(logits);
    return out;
}

UncertaintyMap uncertainty_map(const std::vector<ScalarMap>& masks) {
    check_maps(masks);
    UncertaintyMap out{ScalarMap(masks[0].height(), masks[0].width())};
    for (std::size_t p = 0; p < out.u.size(); ++p) out.u[p] = uncertainty_of(top_two(pixel(masks, p)));
    return out;
}

UncertaintyMap uncertainty_map(const ScoreMaps& maps) { return uncertainty_map(maps.masks); }

double confidence_loss(const UncertaintyMap& u) {
    double s = 0.0;
    for (double v : u.u.cells()) s += v * v;
    return std::sqrt(s);
}

double confidence_loss_rms(const UncertaintyMap& u) {
    if (u.u.empty()) return 0.0;
    return confidence_loss(u) / std::sqrt(static_cast<double>(u.u.size()));
}

double cross_entropy(const std::vector<ScalarMap>& logits, const LabelMap& labels) {
    check_labels(logits, labels);
    const std::size_t n = labels.size();
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        double mx = logits[0][p];
        for (const auto& z : logits) mx = std::max(mx, z[p]);
        double s = 0.0;
        for (const auto& z : logits) s += std::exp(z[p] - mx);
        total += -logits[labels[p]][p] + mx + std::log(s);
    }
    return total / static_cast<double>(n);
}

LossGrad cross_entropy_with_grad(const std::vector<ScalarMap>& logits, const LabelMap& labels) {
    LossGrad out;
    out.loss = cross_entropy(logits, labels);
    out.grad = zeros_like(logits);
    const std::size_t n = labels.size();
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto m = softmax(std::span<const double>(pixel(logits, p)));
        for (std::size_t k = 0; k < m.size(); ++k) {
            out.grad[k][p] = scale * (m[k] - (k == labels[p] ? 1.0 : 0.0));
        }
    }
    return out;
}

LossGrad confidence_loss_with_grad(const std::vector<ScalarMap>& logits) {
    check_maps(logits);
    const std::size_t n = logits[0].size();
    const std::size_t objects = logits.size();
    std::vector<std::vector<double>> masks(n);
    std::vector<TopTwo> tops(n);
    std::vector<double> u(n);
    double sum_sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        masks[p] = softmax(std::span<const double>(pixel(logits, p)));
        tops[p] = top_two(masks[p]);
        u[p] = uncertainty_of(tops[p]);
        sum_sq += u[p] * u[p];
    }
    LossGrad out;
    out.loss = std::sqrt(sum_sq / static_cast<double>(n));
    out.grad = zeros_like(logits);
    if (out.loss == 0.0) return out;

    for (std::size_t p = 0; p < n; ++p) {
        const TopTwo& t = tops[p];
        if (raw_uncertainty(t) >= 1.0) continue;   // clamped: flat
        const std::vector<double>& m = masks[p];
        const double d_loss_d_u = u[p] / (static_cast<double>(n) * out.loss);
        const double denom = t.m2 + kRatioGuard;
        const double du_dm1 = -u[p] / denom;
        const double du_dm2 = u[p] * t.m1 / (denom * denom);
        for (std::size_t k = 0; k < objects; ++k) {
            const double dm1 = t.m1 * ((k == t.first ? 1.0 : 0.0) - m[k]);
            const double dm2 = t.m2 * ((k == t.second ? 1.0 : 0.0) - m[k]);
            out.grad[k][p] = d_loss_d_u * (du_dm1 * dm1 + du_dm2 * dm2);
        }
    }
    return out;
}

TotalLoss total_loss(const std::vector<ScalarMap>& logits, const LabelMap& labels, double lambda_u) {
    LossGrad cls = cross_entropy_with_grad(logits, labels);
    TotalLoss out;
    out.cls = cls.loss;
    out.grad = std::move(cls.grad);
    if (lambda_u != 0.0) {
        const LossGrad conf = confidence_loss_with_grad(logits);
        out.conf = conf.loss;
        for (std::size_t k = 0; k < out.grad.size(); ++k) {
            for (std::size_t p = 0; p < out.grad[k].size(); ++p) out.grad[k][p] += lambda_u * conf.grad[k][p];
        }
    } else {
        out.conf = confidence_loss_rms(uncertainty_map(normalize(logits)));
    }
    out.loss = out.cls + lambda_u * out.conf;
    return out;
}

}  // namespace afb
