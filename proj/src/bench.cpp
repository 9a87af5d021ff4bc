#include "afb/bench.hpp"

#include <chrono>
#include <cmath>
#include <unordered_map>

#include "afb/errors.hpp"
#include "afb/matcher.hpp"

namespace afb {

std::string to_string(BenchStream s) {
    switch (s) {
        case BenchStream::Clustered: return "clustered";
        case BenchStream::Drifting: return "drifting";
        case BenchStream::Uniform: return "uniform";
    }
    return "clustered";
}

BenchStream parse_bench_stream(const std::string& s) {
    if (s == "clustered") return BenchStream::Clustered;
    if (s == "drifting") return BenchStream::Drifting;
    if (s == "uniform") return BenchStream::Uniform;
    throw ConfigError("unknown stream '" + s + "' (clustered|drifting|uniform)");
}

void BenchConfig::validate() const {
    bank.validate();
    if (features_per_frame == 0) throw ConfigError("features per frame must be positive");
    if (frames == 0) throw ConfigError("frames must be positive");
    if (clusters == 0) throw ConfigError("clusters must be positive");
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be nonnegative");
    if (queries == 0) throw ConfigError("queries must be positive");
    if (features_per_frame > bank.budget) throw ConfigError("first frame exceeds budget");
}

nlohmann::json BenchReport::to_json(bool include_timing) const {
    nlohmann::json j{{"merges", merges},
                     {"appends", appends},
                     {"evictions", evictions},
                     {"dropped", dropped},
                     {"final_size", final_size},
                     {"streamed", streamed},
                     {"merge_fraction", merge_fraction},
                     {"oracle_agreement", oracle_agreement}};
    if (include_timing) {
        j["absorb_seconds"] = absorb_seconds;
        j["features_per_second"] = features_per_second;
    }
    return j;
}

namespace {

using Vec = std::vector<double>;

Vec random_direction(Rng& rng, std::size_t dim) {
    Vec v(dim);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (double& x : v) {
            x = rng.normal();
            sq += x * x;
        }
    } while (sq == 0.0);
    for (double& x : v) x /= std::sqrt(sq);
    return v;
}

struct Labeled {
    Feature feature;
    std::uint64_t label;
};

class StreamSource {
public:
    StreamSource(const BenchConfig& cfg) : cfg_(cfg), rng_(cfg.seed), dim_(cfg.bank.key_dim) {
        Rng centres = rng_.split(1);
        for (std::size_t k = 0; k < cfg_.clusters; ++k) {
            centres_.push_back(random_direction(centres, dim_));
            // Orthonormal partner for the drifting rotation plane.
            Vec u = random_direction(centres, dim_);
            double along = 0.0;
            for (std::size_t d = 0; d < dim_; ++d) along += u[d] * centres_.back()[d];
            double sq = 0.0;
            for (std::size_t d = 0; d < dim_; ++d) {
                u[d] -= along * centres_.back()[d];
                sq += u[d] * u[d];
            }
            for (double& x : u) x /= std::sqrt(sq);
            partners_.push_back(std::move(u));
        }
        sample_rng_ = rng_.split(2);
    }

    Labeled draw(std::size_t frame) {
        Vec key;
        std::uint64_t label = 0;
        if (cfg_.stream == BenchStream::Uniform) {
            key = random_direction(sample_rng_, dim_);
            label = serial_++;
        } else {
            label = sample_rng_.below(cfg_.clusters);
            key = centre(label, frame);
            const Vec noise = random_direction(sample_rng_, dim_);
            for (std::size_t d = 0; d < dim_; ++d) key[d] += cfg_.sigma * noise[d];
        }
        Feature f{Vec32(dim_), Vec32(cfg_.bank.value_dim)};
        for (std::size_t d = 0; d < dim_; ++d) f.key[d] = static_cast<float>(key[d]);
        for (std::size_t d = 0; d < f.value.size(); ++d) f.value[d] = static_cast<float>(key[d % dim_]);
        return {std::move(f), label};
    }

private:
    Vec centre(std::size_t k, std::size_t frame) const {
        if (cfg_.stream != BenchStream::Drifting) return centres_[k];
        const double angle = cfg_.rotation * static_cast<double>(frame);
        Vec c(dim_);
        for (std::size_t d = 0; d < dim_; ++d)
            c[d] = std::cos(angle) * centres_[k][d] + std::sin(angle) * partners_[k][d];
        return c;
    }

    const BenchConfig& cfg_;
    Rng rng_;
    Rng sample_rng_{0};
    std::size_t dim_;
    std::vector<Vec> centres_, partners_;
    std::uint64_t serial_ = 0;
};

/// Index of the entry with the largest key dot product (= largest attention
/// weight); ties go to the earliest entry.
template <class KeyOf>
std::size_t argmax_attention(const Vec32& q, std::size_t n, KeyOf key_of) {
    std::size_t best = 0;
    double best_dot = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
        const double s = dot(q, key_of(j));
        if (s > best_dot) {
            best_dot = s;
            best = j;
        }
    }
    return best;
}

}  // namespace

BenchReport run_bench(const BenchConfig& cfg) {
    cfg.validate();
    StreamSource source(cfg);

    std::vector<Labeled> store_all;
    std::unordered_map<std::uint64_t, std::uint64_t> entry_label;   // bank entry id -> label

    std::vector<Feature> batch;
    std::vector<std::uint64_t> labels;
    auto draw_batch = [&](std::size_t frame) {
        batch.clear();
        labels.clear();
        for (std::size_t i = 0; i < cfg.features_per_frame; ++i) {
            Labeled l = source.draw(frame);
            store_all.push_back(l);
            batch.push_back(std::move(l.feature));
            labels.push_back(l.label);
        }
    };

    draw_batch(0);
    FeatureBank bank = FeatureBank::init(cfg.bank, batch, 0);
    for (std::size_t i = 0; i < bank.size(); ++i) entry_label[bank.entries()[i].id] = labels[i];

    BenchReport report;
    double seconds = 0.0;
    for (std::size_t frame = 1; frame < cfg.frames; ++frame) {
        draw_batch(frame);
        // Usage from attending with the incoming batch, as the pipeline does per frame.
        QueryFeatures q{Grid<Vec32>(1, batch.size()), Grid<Vec32>(1, batch.size())};
        for (std::size_t i = 0; i < batch.size(); ++i) {
            q.keys[i] = batch[i].key;
            q.values[i] = batch[i].value;
        }
        bank.record_usage(match(q, bank, cfg.bank.epsilon_l).usage_counts);

        const auto start = std::chrono::steady_clock::now();
        const AbsorbReport r = bank.absorb(batch, frame);
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (r.entry_ids[i] && !entry_label.contains(*r.entry_ids[i])) entry_label[*r.entry_ids[i]] = labels[i];
        }
        report.streamed += batch.size();
    }

    report.merges = bank.stats().merges;
    report.appends = bank.stats().appends;
    report.evictions = bank.stats().evictions;
    report.dropped = bank.stats().dropped;
    report.final_size = bank.size();
    const double offered = static_cast<double>(report.merges + report.appends + report.dropped);
    report.merge_fraction = offered > 0.0 ? static_cast<double>(report.merges) / offered : 0.0;
    report.absorb_seconds = seconds;
    report.features_per_second = seconds > 0.0 ? static_cast<double>(report.streamed) / seconds : 0.0;

    // Held-out queries come from the stream's distribution at its end. Uniform
    // queries carry no cluster, so agreement there compares source features.
    std::size_t agree = 0;
    const auto& entries = bank.entries();
    for (std::size_t i = 0; i < cfg.queries; ++i) {
        const Labeled q = source.draw(cfg.frames);
        const std::size_t a = argmax_attention(q.feature.key, entries.size(),
                                               [&](std::size_t j) -> const Vec32& { return entries[j].key; });
        const std::size_t b = argmax_attention(q.feature.key, store_all.size(),
                                               [&](std::size_t j) -> const Vec32& { return store_all[j].feature.key; });
        if (entry_label.at(entries[a].id) == store_all[b].label) ++agree;
    }
    report.oracle_agreement = static_cast<double>(agree) / static_cast<double>(cfg.queries);
    return report;
}

}  // namespace afb
