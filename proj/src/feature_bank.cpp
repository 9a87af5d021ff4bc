#include "afb/feature_bank.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <type_traits>
#include <ostream>
#include <string>

#include "afb/errors.hpp"
#include "afb/parallel.hpp"

namespace afb {

void BankConfig::validate() const {
    if (!(epsilon_h > 0.0)) throw ConfigError("epsilon_h must be positive");
    if (!(lambda_p >= 0.0 && lambda_p < 1.0)) throw ConfigError("lambda_p must be in [0,1)");
    if (!(epsilon_l > 0.0 && epsilon_l < 1.0)) throw ConfigError("epsilon_l must be in (0,1)");
    if (budget < 1) throw ConfigError("budget must be at least 1");
    if (key_dim < 1 || value_dim < 1) throw ConfigError("key/value dims must be positive");
}

namespace {

void normalize_in_place(Vec32& v) {
    const double n = norm(v);
    if (n == 0.0) return;
    for (float& x : v) x = static_cast<float>(x / n);
}

// Unit-normalized copy of every key, or an empty vector for zero-norm keys.
std::vector<Vec32> unit_keys(const std::vector<FeatureEntry>& entries) {
    std::vector<Vec32> out(entries.size());
    parallel_for(entries.size(), [&](std::size_t j) {
        const double n = norm(entries[j].key);
        if (n == 0.0) return;
        Vec32 k(entries[j].key.size());
        for (std::size_t d = 0; d < k.size(); ++d) k[d] = static_cast<float>(entries[j].key[d] / n);
        out[j] = std::move(k);
    });
    return out;
}

struct Best {
    double similarity = -std::numeric_limits<double>::infinity();
    std::size_t index = 0;
};

Best most_similar(std::span<const float> key, const std::vector<Vec32>& unit) {
    Best best;
    const double n = norm(key);
    if (n == 0.0) return best;
    for (std::size_t j = 0; j < unit.size(); ++j) {
        if (unit[j].empty()) continue;
        const double h = dot(key, unit[j]) / n;
        if (h > best.similarity) {  // strict: earliest (smallest id) wins ties
            best.similarity = h;
            best.index = j;
        }
    }
    return best;
}

void ema(Vec32& stored, std::span<const float> incoming, double lambda) {
    for (std::size_t d = 0; d < stored.size(); ++d) {
        stored[d] = static_cast<float>(lambda * stored[d] + (1.0 - lambda) * incoming[d]);
    }
}

}  // namespace

void FeatureBank::check_dims(const Feature& f) const {
    if (f.key.size() != config_.key_dim || f.value.size() != config_.value_dim)
        throw std::invalid_argument("feature dimension mismatch");
}

FeatureEntry FeatureBank::make_entry(const Feature& f, std::uint64_t frame) {
    FeatureEntry e{f.key, f.value, 0.0, frame, next_id_++};
    if (config_.normalize_keys) normalize_in_place(e.key);
    return e;
}

FeatureBank FeatureBank::init(const BankConfig& config, std::span<const Feature> first_features,
                              std::uint64_t frame) {
    config.validate();
    if (first_features.empty()) throw std::invalid_argument("feature bank needs first-frame features");
    if (first_features.size() > config.budget) throw std::invalid_argument("first frame exceeds budget");
    FeatureBank bank(config);
    bank.current_frame_ = frame;
    bank.entries_.reserve(first_features.size());
    for (const Feature& f : first_features) {
        bank.check_dims(f);
        bank.entries_.push_back(bank.make_entry(f, frame));
    }
    return bank;
}

AbsorbReport FeatureBank::absorb(std::span<const Feature> new_features, std::uint64_t frame) {
    if (frame <= current_frame_)
        throw std::invalid_argument("absorb: frame must advance");
    for (const Feature& f : new_features) check_dims(f);
    current_frame_ = frame;

    AbsorbReport report;
    report.entry_ids.resize(new_features.size());

    // Assignment against the entry-time snapshot.
    const std::vector<Vec32> unit = unit_keys(entries_);
    std::vector<Best> best(new_features.size());
    parallel_for(new_features.size(),
                 [&](std::size_t i) { best[i] = most_similar(new_features[i].key, unit); });

    std::vector<std::size_t> staged;
    for (std::size_t i = 0; i < new_features.size(); ++i) {
        if (best[i].similarity > config_.epsilon_h) {
            FeatureEntry& target = entries_[best[i].index];
            ema(target.key, new_features[i].key, config_.lambda_p);
            ema(target.value, new_features[i].value, config_.lambda_p);
            if (config_.normalize_keys) normalize_in_place(target.key);
            report.entry_ids[i] = target.id;
            ++report.merged;
        } else {
            staged.push_back(i);
        }
    }

    if (staged.size() > config_.budget) {
        // More novel features than the whole budget: keep an evenly spaced
        // subset so the new entries still cover the entire frame.
        std::vector<std::size_t> kept;
        kept.reserve(config_.budget);
        for (std::size_t k = 0; k < config_.budget; ++k) kept.push_back(staged[k * staged.size() / config_.budget]);
        report.dropped = staged.size() - config_.budget;
        staged = std::move(kept);
    }
    if (entries_.size() + staged.size() > config_.budget) {
        report.evicted = evict(staged.size()).size();
    }
    for (std::size_t i : staged) {
        entries_.push_back(make_entry(new_features[i], frame));
        report.entry_ids[i] = entries_.back().id;
        ++report.appended;
    }

    stats_.merges += report.merged;
    stats_.appends += report.appended;
    stats_.dropped += report.dropped;
    return report;
}

void FeatureBank::record_usage(std::span<const std::uint64_t> match_counts) {
    if (match_counts.size() != entries_.size())
        throw std::invalid_argument("record_usage: count list length mismatch");
    for (std::size_t j = 0; j < entries_.size(); ++j) {
        if (match_counts[j] > 0) entries_[j].cnt += std::log(static_cast<double>(match_counts[j]) + 1.0);
    }
}

double FeatureBank::lfu_index(const FeatureEntry& entry, std::uint64_t current_frame) {
    if (current_frame < entry.birth) throw std::invalid_argument("lfu_index: entry born in the future");
    const double span = static_cast<double>(current_frame - entry.birth + 1);
    return entry.cnt / span;
}

std::vector<std::uint64_t> FeatureBank::evict(std::size_t needed_slots) {
    if (needed_slots > config_.budget) throw std::invalid_argument("evict: needed slots exceed budget");
    std::vector<std::uint64_t> evicted;
    if (entries_.size() + needed_slots <= config_.budget) return evicted;
    const std::size_t excess = entries_.size() + needed_slots - config_.budget;

    std::vector<double> lfu(entries_.size());
    for (std::size_t j = 0; j < entries_.size(); ++j) lfu[j] = lfu_index(entries_[j], current_frame_);
    std::vector<std::size_t> order(entries_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (lfu[a] != lfu[b]) return lfu[a] < lfu[b];
        if (entries_[a].birth != entries_[b].birth) return entries_[a].birth < entries_[b].birth;
        return entries_[a].id < entries_[b].id;
    });

    std::vector<bool> remove(entries_.size(), false);
    for (std::size_t k = 0; k < excess; ++k) {
        remove[order[k]] = true;
        evicted.push_back(entries_[order[k]].id);
    }
    std::vector<FeatureEntry> kept;
    kept.reserve(entries_.size() - excess);
    for (std::size_t j = 0; j < entries_.size(); ++j) {
        if (!remove[j]) kept.push_back(std::move(entries_[j]));
    }
    entries_ = std::move(kept);
    stats_.evictions += evicted.size();
    return evicted;
}

namespace {

constexpr std::array<char, 4> kMagic{'A', 'F', 'B', 'K'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T>);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
    }
    out.write(bytes.data(), bytes.size());
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_le(out, bits);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_le(out, bits);
}

template <typename T>
T get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes{};
    const auto offset = in.tellg();
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw DataError(std::string("snapshot truncated reading ") + what + " at offset " +
                        std::to_string(static_cast<long long>(offset)));
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<T>(v);
}

float get_f32(std::istream& in, const char* what) {
    const auto bits = get_le<std::uint32_t>(in, what);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

double get_f64(std::istream& in, const char* what) {
    const auto bits = get_le<std::uint64_t>(in, what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

void FeatureBank::save_snapshot(std::ostream& out) const {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kSnapshotVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config_.key_dim));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config_.value_dim));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
    for (const FeatureEntry& e : entries_) {
        put_le<std::uint64_t>(out, e.id);
        put_le<std::uint64_t>(out, e.birth);
        put_f64(out, e.cnt);
        for (float k : e.key) put_f32(out, k);
        for (float v : e.value) put_f32(out, v);
    }
}

FeatureBank FeatureBank::load_snapshot(std::istream& in, const BankConfig& config) {
    config.validate();
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("snapshot: bad magic");
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kSnapshotVersion) throw DataError("snapshot: unsupported version " + std::to_string(version));
    const auto key_dim = get_le<std::uint32_t>(in, "key_dim");
    const auto value_dim = get_le<std::uint32_t>(in, "value_dim");
    if (key_dim != config.key_dim || value_dim != config.value_dim)
        throw DataError("snapshot: dimensions do not match config");
    const auto count = get_le<std::uint32_t>(in, "entry_count");
    if (count > config.budget) throw DataError("snapshot: more entries than budget");

    FeatureBank bank(config);
    bank.entries_.reserve(count);
    for (std::uint32_t j = 0; j < count; ++j) {
        FeatureEntry e;
        e.id = get_le<std::uint64_t>(in, "id");
        e.birth = get_le<std::uint64_t>(in, "birth");
        e.cnt = get_f64(in, "cnt");
        e.key.resize(key_dim);
        e.value.resize(value_dim);
        for (float& k : e.key) k = get_f32(in, "key");
        for (float& v : e.value) v = get_f32(in, "value");
        if (!bank.entries_.empty() && e.id <= bank.entries_.back().id)
            throw DataError("snapshot: entry ids not increasing");
        if (!(e.cnt >= 0.0)) throw DataError("snapshot: negative cnt");
        bank.current_frame_ = std::max(bank.current_frame_, e.birth);
        bank.next_id_ = e.id + 1;
        bank.entries_.push_back(std::move(e));
    }
    return bank;
}

std::vector<Feature> prepool(std::span<const Feature> features, const BankConfig& config) {
    std::vector<Feature> pooled;
    std::vector<Vec32> unit;
    for (const Feature& f : features) {
        Best best = most_similar(f.key, unit);
        if (!pooled.empty() && best.similarity > config.epsilon_h) {
            Feature& target = pooled[best.index];
            ema(target.key, f.key, config.lambda_p);
            ema(target.value, f.value, config.lambda_p);
            Vec32 u = target.key;
            normalize_in_place(u);
            unit[best.index] = norm(u) > 0.0 ? u : Vec32{};
        } else {
            pooled.push_back(f);
            Vec32 u = f.key;
            normalize_in_place(u);
            unit.push_back(norm(u) > 0.0 ? u : Vec32{});
        }
    }
    if (pooled.size() <= config.budget) return pooled;
    std::vector<Feature> kept;
    kept.reserve(config.budget);
    for (std::size_t k = 0; k < config.budget; ++k) {
        kept.push_back(pooled[k * pooled.size() / config.budget]);
    }
    return kept;
}

}  // namespace afb
