#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "afb/feature_bank.hpp"

namespace afb {

/// Synthetic feature streams for exercising a single bank.
///   clustered: fixed cluster centres plus small isotropic noise
///   drifting:  the same, but every centre rotates slowly over time
///   uniform:   independent random directions
enum class BenchStream { Clustered, Drifting, Uniform };

std::string to_string(BenchStream s);
BenchStream parse_bench_stream(const std::string& s);

inline constexpr std::size_t kUnboundedBudget = std::numeric_limits<std::size_t>::max();

struct BenchConfig {
    BenchStream stream = BenchStream::Clustered;
    std::size_t features_per_frame = 50;
    std::size_t frames = 200;
    BankConfig bank;                 // key_dim doubles as the stream dimension
    std::size_t clusters = 8;
    double sigma = 0.05;             // norm of the noise added to a centre
    double rotation = 0.01;          // drifting: radians per frame
    std::size_t queries = 500;       // held out, drawn after the stream ends
    std::uint64_t seed = 1;

    void validate() const;
};

struct BenchReport {
    std::uint64_t merges = 0;
    std::uint64_t appends = 0;
    std::uint64_t evictions = 0;
    std::uint64_t dropped = 0;
    std::size_t final_size = 0;
    std::size_t streamed = 0;          // features offered to absorb (first frame excluded)
    double merge_fraction = 0.0;       // merges / (merges + appends + dropped)
    double absorb_seconds = 0.0;
    double features_per_second = 0.0;
    double oracle_agreement = 0.0;     // argmax label match vs. store-all

    nlohmann::json to_json(bool include_timing = true) const;
};

/// Streams `frames` batches through init/record_usage/absorb and compares the
/// resulting bank with an unbounded store-all list on held-out queries.
BenchReport run_bench(const BenchConfig& cfg);

}  // namespace afb
