#include "afb/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "afb/numerics.hpp"
#include "afb/parallel.hpp"

namespace afb {

MatchResult match(const QueryFeatures& query, std::span<const FeatureEntry> bank, double epsilon_l) {
    if (bank.empty()) throw std::invalid_argument("empty feature bank");
    if (!query.keys.same_shape(query.values)) throw std::invalid_argument("match: key/value grid shape mismatch");
    if (query.keys.empty()) throw std::invalid_argument("match: empty query");

    const std::size_t n = bank.size();
    const std::size_t dk = bank[0].key.size();
    const std::size_t dv = bank[0].value.size();
    const std::size_t h = query.keys.height();
    const std::size_t w = query.keys.width();

    // Packed row-major copies for the inner loops.
    std::vector<float> keys(n * dk);
    std::vector<float> values(n * dv);
    for (std::size_t j = 0; j < n; ++j) {
        if (bank[j].key.size() != dk || bank[j].value.size() != dv)
            throw std::invalid_argument("match: inconsistent bank dimensions");
        std::copy(bank[j].key.begin(), bank[j].key.end(), keys.begin() + j * dk);
        std::copy(bank[j].value.begin(), bank[j].value.end(), values.begin() + j * dv);
    }

    MatchResult result;
    result.retrieved = Grid<Vec32>(h, w);
    result.concat = Grid<Vec32>(h, w);
    std::vector<std::vector<std::uint32_t>> row_counts(h, std::vector<std::uint32_t>(n, 0));

    parallel_for(h, [&](std::size_t y) {
        std::vector<double> logits(n);
        std::vector<double> acc(dv);
        auto& counts = row_counts[y];
        for (std::size_t x = 0; x < w; ++x) {
            const Vec32& qk = query.keys(y, x);
            const Vec32& qv = query.values(y, x);
            if (qk.size() != dk) throw std::invalid_argument("match: query key dimension mismatch");
            if (qv.size() != dv) throw std::invalid_argument("match: query value dimension mismatch");
            double mx = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                const double s = dot(qk.data(), keys.data() + j * dk, dk);
                logits[j] = s;
                mx = std::max(mx, s);
            }
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                logits[j] = std::exp(logits[j] - mx);
                total += logits[j];
            }
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                const double weight = logits[j] / total;
                if (weight > epsilon_l) ++counts[j];
                if (weight == 0.0) continue;
                const float* v = values.data() + j * dv;
                for (std::size_t d = 0; d < dv; ++d) acc[d] += weight * v[d];
            }
            Vec32 retrieved(dv);
            for (std::size_t d = 0; d < dv; ++d) retrieved[d] = static_cast<float>(acc[d]);
            Vec32 cat;
            cat.reserve(2 * dv);
            cat.insert(cat.end(), qv.begin(), qv.end());
            cat.insert(cat.end(), retrieved.begin(), retrieved.end());
            result.retrieved(y, x) = std::move(retrieved);
            result.concat(y, x) = std::move(cat);
        }
    });

    result.usage_counts.assign(n, 0);
    for (const auto& counts : row_counts) {
        for (std::size_t j = 0; j < n; ++j) result.usage_counts[j] += counts[j];
    }
    return result;
}

MatchResult match(const QueryFeatures& query, const FeatureBank& bank, double epsilon_l) {
    return match(query, std::span<const FeatureEntry>(bank.entries()), epsilon_l);
}

}  // namespace afb
