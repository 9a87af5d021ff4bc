#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "afb/feature_bank.hpp"
#include "afb/numerics.hpp"

namespace afb {

struct QueryFeatures {
    Grid<Vec32> keys;
    Grid<Vec32> values;
};

struct MatchResult {
    Grid<Vec32> retrieved;   // attention-weighted bank value per position
    Grid<Vec32> concat;      // [query value, retrieved value]
    std::vector<std::uint64_t> usage_counts;  // per bank entry, positions with weight > epsilon_l
};

/// Softmax attention over raw key dot products: each query position retrieves
/// a weighted sum of bank values. Pure; the caller forwards usage_counts to
/// FeatureBank::record_usage. Throws "empty feature bank" on an empty bank.
MatchResult match(const QueryFeatures& query, std::span<const FeatureEntry> bank, double epsilon_l);
MatchResult match(const QueryFeatures& query, const FeatureBank& bank, double epsilon_l);

}  // namespace afb
