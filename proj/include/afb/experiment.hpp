#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afb/metrics.hpp"
#include "afb/pipeline.hpp"
#include "afb/synthgen.hpp"

namespace afb {

/// Called after every segmented frame with the result and the live segmenter.
using FrameObserver = std::function<void(const FrameResult&, const Segmenter&)>;

/// Segments a saved dataset from its frame-0 annotation. Writes
/// out/masks/%06d.pgm for frames 1..T-1 and one JSON line per frame to
/// out/stats.jsonl. Runtime is left out of the stats when include_timing is
/// false, making the stats file reproducible byte for byte.
void run_dataset(const DatasetReader& data, const PipelineConfig& cfg, const std::filesystem::path& out,
                 bool include_timing, const FrameObserver& observer = {});

/// Segments a dataset in memory and scores frames 1..T-1 against its ground truth.
SequenceScores run_and_score(const DatasetReader& data, const PipelineConfig& cfg,
                             const FrameObserver& observer = {});

/// Scores predicted masks against a dataset's ground truth. `pred` may be a
/// run directory (holding masks/) or a masks directory; it must hold exactly
/// frames 1..T-1. Throws DataError on a missing, empty or mismatched directory.
SequenceScores evaluate_dirs(const std::filesystem::path& pred, const std::filesystem::path& gt);

/// One ablation row: a memory policy with refinement on or off. Named
/// "<policy>+urr" / "<policy>-urr".
struct AblationVariant {
    MemoryPolicy policy = MemoryPolicy::Afb;
    bool urr = true;

    std::string name() const;
    friend bool operator==(const AblationVariant&, const AblationVariant&) = default;
};

AblationVariant parse_variant(const std::string& name);
/// Every policy, each with and without refinement.
std::vector<AblationVariant> all_variants();
/// Refinement off means u_threshold = 1: no pixel has U above it.
PipelineConfig variant_config(const PipelineConfig& base, const AblationVariant& v);

struct AblationRow {
    AblationVariant variant;
    SequenceScores scores;
};

std::vector<AblationRow> run_ablation(const DatasetReader& data, const PipelineConfig& base,
                                      const std::vector<AblationVariant>& variants);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows);

nlohmann::json scorer_json(const Scorer& s);
Scorer scorer_from_json(const nlohmann::json& j);
Scorer load_scorer(const std::filesystem::path& path);

/// Refinement inputs of up to max_samples evenly spaced frames, paired with
/// their ground truth, for scorer training.
std::vector<RefineSample> collect_refine_samples(const DatasetReader& data, const PipelineConfig& cfg,
                                                 std::size_t max_samples);

}  // namespace afb
