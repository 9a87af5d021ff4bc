#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "afb/numerics.hpp"

namespace afb {

/// A (key, value) pair produced by an encoder for one grid cell.
struct Feature {
    Vec32 key;
    Vec32 value;
};

/// One bank slot.
struct FeatureEntry {
    Vec32 key;
    Vec32 value;
    double cnt = 0.0;          // LFU accumulator
    std::uint64_t birth = 0;   // frame index of insertion
    std::uint64_t id = 0;      // monotone insertion id

    friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

struct BankConfig {
    double epsilon_h = 0.95;   // merge threshold on cosine similarity; > 1 disables merging
    double lambda_p = 0.9;     // EMA weight kept by the existing entry
    double epsilon_l = 1e-4;   // attention weight above which an entry counts as used
    std::size_t budget = 1024;
    std::size_t key_dim = 32;
    std::size_t value_dim = 32;
    bool normalize_keys = false;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

struct BankStats {
    std::uint64_t merges = 0;
    std::uint64_t appends = 0;
    std::uint64_t evictions = 0;
    std::uint64_t dropped = 0;   // staged appends beyond the whole budget
};

struct AbsorbReport {
    std::size_t merged = 0;
    std::size_t appended = 0;
    std::size_t evicted = 0;
    std::size_t dropped = 0;
    /// Per input feature: id of the entry it merged into or was appended as;
    /// empty when the feature was dropped.
    std::vector<std::optional<std::uint64_t>> entry_ids;
};

/// Bounded per-object key/value store. New features are merged into their most
/// similar entry by exponential moving average or appended; when an append
/// would exceed the budget, entries with the lowest LFU index are evicted.
class FeatureBank {
public:
    /// Builds a bank from the first frame's features. Throws when the list is
    /// empty, dimensions mismatch, or there are more features than the budget.
    static FeatureBank init(const BankConfig& config, std::span<const Feature> first_features,
                            std::uint64_t frame);

    /// Merge-or-append every feature. Similarity is evaluated against the bank
    /// as it was on entry; EMA updates are applied in input order.
    AbsorbReport absorb(std::span<const Feature> new_features, std::uint64_t frame);

    /// cnt(j) += ln(count_j + 1).
    void record_usage(std::span<const std::uint64_t> match_counts);

    /// Removes lowest-LFU entries until size + needed_slots <= budget.
    /// Returns evicted ids in eviction order.
    std::vector<std::uint64_t> evict(std::size_t needed_slots);

    static double lfu_index(const FeatureEntry& entry, std::uint64_t current_frame);

    const std::vector<FeatureEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const BankConfig& config() const { return config_; }
    std::uint64_t current_frame() const { return current_frame_; }
    const BankStats& stats() const { return stats_; }

    /// Little-endian "AFBK" snapshot.
    void save_snapshot(std::ostream& out) const;
    static FeatureBank load_snapshot(std::istream& in, const BankConfig& config);

    friend bool operator==(const FeatureBank& a, const FeatureBank& b) {
        return a.entries_ == b.entries_ && a.current_frame_ == b.current_frame_;
    }

private:
    explicit FeatureBank(const BankConfig& config) : config_(config) {}

    void check_dims(const Feature& f) const;
    FeatureEntry make_entry(const Feature& f, std::uint64_t frame);

    BankConfig config_;
    std::vector<FeatureEntry> entries_;
    std::uint64_t current_frame_ = 0;
    std::uint64_t next_id_ = 0;
    BankStats stats_;
};

/// Reduces a first-frame feature list to at most config.budget items: greedy
/// merge-or-append with the bank's own rule, then an evenly spaced subsample
/// if the merged list is still too long.
std::vector<Feature> prepool(std::span<const Feature> features, const BankConfig& config);

}  // namespace afb
