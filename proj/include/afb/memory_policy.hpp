#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "afb/feature_bank.hpp"

namespace afb {

/// Which past features an object's memory keeps.
enum class MemoryPolicy {
    Afb,            // adaptive feature bank (merge / append / LFU evict)
    First,          // first frame only
    Latest,         // most recent absorbed frame only
    FirstLatest,    // first frame + most recent frame
    FirstLatest5,   // first frame + five most recent frames
};

std::string to_string(MemoryPolicy p);
MemoryPolicy parse_memory_policy(const std::string& s);
const std::vector<MemoryPolicy>& all_memory_policies();

struct MemoryStats {
    std::size_t size = 0;
    std::uint64_t merges = 0;
    std::uint64_t appends = 0;
    std::uint64_t evictions = 0;
};

/// One object's feature memory behind a single interface, so the matching
/// loop is identical for every policy.
class ObjectMemory {
public:
    /// First-frame features longer than the budget are pre-pooled.
    ObjectMemory(MemoryPolicy policy, const BankConfig& config, std::span<const Feature> first,
                 std::uint64_t frame);

    MemoryPolicy policy() const { return policy_; }
    std::span<const FeatureEntry> entries() const;
    std::size_t size() const { return entries().size(); }

    /// Forwards match counts to the LFU accumulator (AFB only).
    void record_usage(std::span<const std::uint64_t> counts);
    /// Takes in the features of a newly segmented frame. An empty feature list
    /// leaves fixed-policy memories unchanged.
    void update(std::span<const Feature> features, std::uint64_t frame);

    MemoryStats stats() const;
    const FeatureBank* bank() const { return bank_ ? &*bank_ : nullptr; }

private:
    void rebuild();
    std::vector<FeatureEntry> to_entries(std::span<const Feature> features, std::uint64_t frame);

    MemoryPolicy policy_;
    BankConfig config_;
    std::optional<FeatureBank> bank_;
    std::vector<FeatureEntry> first_;
    std::deque<std::vector<FeatureEntry>> recent_;
    std::vector<FeatureEntry> combined_;
    std::uint64_t next_id_ = 0;
    std::uint64_t appends_ = 0;
};

}  // namespace afb
