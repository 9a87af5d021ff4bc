#pragma once

#include <cstddef>
#include <vector>

#include "afb/feature_bank.hpp"
#include "afb/numerics.hpp"
#include "afb/uncertainty.hpp"

namespace afb::test {

inline Vec32 random_vec(Rng& rng, std::size_t dim, double scale = 1.0) {
    Vec32 v(dim);
    for (float& x : v) x = static_cast<float>(rng.normal() * scale);
    return v;
}

inline Feature random_feature(Rng& rng, std::size_t dk, std::size_t dv) {
    return {random_vec(rng, dk), random_vec(rng, dv)};
}

inline std::vector<ScalarMap> random_maps(Rng& rng, std::size_t n, std::size_t h, std::size_t w, double scale) {
    std::vector<ScalarMap> maps(n, ScalarMap(h, w));
    for (auto& m : maps) {
        for (double& v : m.cells()) v = rng.normal() * scale;
    }
    return maps;
}

inline LabelMap random_labels(Rng& rng, std::size_t h, std::size_t w, std::size_t classes) {
    LabelMap l(h, w);
    for (auto& v : l.cells()) v = static_cast<std::uint8_t>(rng.below(classes));
    return l;
}

/// |a - n| / max(|a|, |n|, floor).
inline double rel_error(double analytic, double numeric, double floor = 1e-8) {
    const double d = std::abs(analytic - numeric);
    return d / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace afb::test
