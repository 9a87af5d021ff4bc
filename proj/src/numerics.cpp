#include "afb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace afb {

double dot(const float* a, const float* b, std::size_t n) {
    // Four fixed lanes: vectorizes, and the summation order never depends on threading.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * b[i];
        s1 += static_cast<double>(a[i + 1]) * b[i + 1];
        s2 += static_cast<double>(a[i + 2]) * b[i + 2];
        s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    }
    for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
    return (s0 + s1) + (s2 + s3);
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    return dot(a.data(), b.data(), a.size());
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

Vec32 softmax(std::span<const float> scores) {
    if (scores.empty()) throw std::invalid_argument("empty softmax");
    const float mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> e(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        e[i] = std::exp(static_cast<double>(scores[i]) - mx);
        total += e[i];
    }
    Vec32 out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = static_cast<float>(e[i] / total);
    return out;
}

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("empty softmax");
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - mx);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("zero-norm vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double cosine_or_zero(std::span<const float> a, std::span<const float> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

namespace {

struct Tap {
    std::size_t i0, i1;
    double t;
};

// Corner-aligned source coordinate for each output index.
std::vector<Tap> taps(std::size_t src, std::size_t out) {
    std::vector<Tap> result(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double pos = (out == 1 || src == 1)
                               ? 0.0
                               : static_cast<double>(o) * static_cast<double>(src - 1) /
                                     static_cast<double>(out - 1);
        std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
        if (i0 >= src - 1) i0 = src - 1;
        const std::size_t i1 = std::min(i0 + 1, src - 1);
        result[o] = {i0, i1, pos - static_cast<double>(i0)};
    }
    return result;
}

template <typename T>
void check_upsample(const Grid<T>& src, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("bilinear_upsample: zero output size");
    if (src.empty()) throw std::invalid_argument("bilinear_upsample: empty source");
    if (out_h < src.height() || out_w < src.width())
        throw std::invalid_argument("bilinear_upsample: output smaller than source");
}

}  // namespace

Grid<float> bilinear_upsample(const Grid<float>& src, std::size_t out_h, std::size_t out_w) {
    check_upsample(src, out_h, out_w);
    const auto ty = taps(src.height(), out_h);
    const auto tx = taps(src.width(), out_w);
    Grid<float> out(out_h, out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const Tap& a = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            const Tap& b = tx[x];
            const double top = (1.0 - b.t) * src(a.i0, b.i0) + b.t * src(a.i0, b.i1);
            const double bot = (1.0 - b.t) * src(a.i1, b.i0) + b.t * src(a.i1, b.i1);
            out(y, x) = static_cast<float>((1.0 - a.t) * top + a.t * bot);
        }
    }
    return out;
}

Grid<Vec32> bilinear_upsample(const Grid<Vec32>& src, std::size_t out_h, std::size_t out_w) {
    check_upsample(src, out_h, out_w);
    const std::size_t dim = src[0].size();
    const auto ty = taps(src.height(), out_h);
    const auto tx = taps(src.width(), out_w);
    Grid<Vec32> out(out_h, out_w, Vec32(dim));
    for (std::size_t y = 0; y < out_h; ++y) {
        const Tap& a = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            const Tap& b = tx[x];
            Vec32& o = out(y, x);
            for (std::size_t d = 0; d < dim; ++d) {
                const double top = (1.0 - b.t) * src(a.i0, b.i0)[d] + b.t * src(a.i0, b.i1)[d];
                const double bot = (1.0 - b.t) * src(a.i1, b.i0)[d] + b.t * src(a.i1, b.i1)[d];
                o[d] = static_cast<float>((1.0 - a.t) * top + a.t * bot);
            }
        }
    }
    return out;
}

Grid<float> lattice_resample(const Grid<float>& src, std::size_t out_h, std::size_t out_w, double offset,
                             double scale) {
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("lattice_resample: zero output size");
    if (src.empty()) throw std::invalid_argument("lattice_resample: empty source");
    if (!(scale > 0.0)) throw std::invalid_argument("lattice_resample: scale must be positive");
    auto make = [&](std::size_t n_src, std::size_t n_out) {
        std::vector<Tap> t(n_out);
        for (std::size_t o = 0; o < n_out; ++o) {
            const double pos = std::clamp((static_cast<double>(o) - offset) / scale, 0.0,
                                          static_cast<double>(n_src - 1));
            std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
            if (i0 >= n_src - 1) i0 = n_src - 1;
            t[o] = {i0, std::min(i0 + 1, n_src - 1), pos - static_cast<double>(i0)};
        }
        return t;
    };
    const auto ty = make(src.height(), out_h);
    const auto tx = make(src.width(), out_w);
    Grid<float> out(out_h, out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const Tap& a = ty[y];
        for (std::size_t x = 0; x < out_w; ++x) {
            const Tap& b = tx[x];
            const double top = (1.0 - b.t) * src(a.i0, b.i0) + b.t * src(a.i0, b.i1);
            const double bot = (1.0 - b.t) * src(a.i1, b.i0) + b.t * src(a.i1, b.i1);
            out(y, x) = static_cast<float>((1.0 - a.t) * top + a.t * bot);
        }
    }
    return out;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: empty range");
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(mix64(seed_ ^ mix64(stream + 0x632be59bd9b4e019ULL)));
}

}  // namespace afb
