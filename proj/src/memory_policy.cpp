#include "afb/memory_policy.hpp"

#include "afb/errors.hpp"

namespace afb {

std::string to_string(MemoryPolicy p) {
    switch (p) {
        case MemoryPolicy::Afb: return "afb";
        case MemoryPolicy::First: return "first";
        case MemoryPolicy::Latest: return "latest";
        case MemoryPolicy::FirstLatest: return "first_latest";
        case MemoryPolicy::FirstLatest5: return "first_latest5";
    }
    return "afb";
}

MemoryPolicy parse_memory_policy(const std::string& s) {
    for (MemoryPolicy p : all_memory_policies()) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("unknown memory policy '" + s + "'");
}

const std::vector<MemoryPolicy>& all_memory_policies() {
    static const std::vector<MemoryPolicy> all{MemoryPolicy::Afb, MemoryPolicy::First, MemoryPolicy::Latest,
                                               MemoryPolicy::FirstLatest, MemoryPolicy::FirstLatest5};
    return all;
}

ObjectMemory::ObjectMemory(MemoryPolicy policy, const BankConfig& config, std::span<const Feature> first,
                           std::uint64_t frame)
    : policy_(policy), config_(config) {
    config_.validate();
    if (first.empty()) throw std::invalid_argument("object memory needs first-frame features");
    std::vector<Feature> pooled;
    if (first.size() > config_.budget) {
        pooled = prepool(first, config_);
        first = pooled;
    }
    if (policy_ == MemoryPolicy::Afb) {
        bank_ = FeatureBank::init(config_, first, frame);
    } else {
        first_ = to_entries(first, frame);
        rebuild();
    }
}

std::vector<FeatureEntry> ObjectMemory::to_entries(std::span<const Feature> features, std::uint64_t frame) {
    std::vector<FeatureEntry> out;
    out.reserve(features.size());
    for (const Feature& f : features) {
        if (f.key.size() != config_.key_dim || f.value.size() != config_.value_dim)
            throw std::invalid_argument("feature dimension mismatch");
        out.push_back({f.key, f.value, 0.0, frame, next_id_++});
    }
    return out;
}

std::span<const FeatureEntry> ObjectMemory::entries() const {
    if (bank_) return bank_->entries();
    return combined_;
}

void ObjectMemory::record_usage(std::span<const std::uint64_t> counts) {
    if (bank_) bank_->record_usage(counts);
}

void ObjectMemory::update(std::span<const Feature> features, std::uint64_t frame) {
    if (bank_) {
        bank_->absorb(features, frame);
        return;
    }
    if (features.empty() || policy_ == MemoryPolicy::First) return;
    recent_.push_back(to_entries(features, frame));
    appends_ += features.size();
    const std::size_t keep = policy_ == MemoryPolicy::FirstLatest5 ? 5 : 1;
    while (recent_.size() > keep) recent_.pop_front();
    rebuild();
}

void ObjectMemory::rebuild() {
    combined_.clear();
    const bool with_first = policy_ != MemoryPolicy::Latest || recent_.empty();
    if (with_first) combined_.insert(combined_.end(), first_.begin(), first_.end());
    for (const auto& frame : recent_) combined_.insert(combined_.end(), frame.begin(), frame.end());
}

MemoryStats ObjectMemory::stats() const {
    MemoryStats s;
    s.size = size();
    if (bank_) {
        s.merges = bank_->stats().merges;
        s.appends = bank_->stats().appends;
        s.evictions = bank_->stats().evictions;
    } else {
        s.appends = appends_;
    }
    return s;
}

}  // namespace afb
