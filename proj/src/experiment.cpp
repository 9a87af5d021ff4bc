#include "afb/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "afb/errors.hpp"
#include "afb/image.hpp"

namespace afb {

namespace fs = std::filesystem;

namespace {

std::size_t first_annotated(const DatasetReader& data) {
    if (data.size() < 2) throw DataError(data.dir().string() + ": need at least two frames");
    if (data.annotated().empty() || data.annotated().front() != 0)
        throw DataError(data.dir().string() + ": frame 0 carries no annotation");
    return 0;
}

/// Shared frame loop; `sink` sees every result in order.
void segment(const DatasetReader& data, const PipelineConfig& cfg,
             const std::function<void(std::size_t, const FrameResult&, const Segmenter&)>& sink) {
    const std::size_t t0 = first_annotated(data);
    Segmenter seg(cfg, data.num_objects());
    seg.init(data.frame(t0), data.mask(t0));
    for (std::size_t t = t0 + 1; t < data.size(); ++t) {
        FrameResult r;
        if (cfg.absorb_ground_truth) {
            const LabelMap gt = data.mask(t);
            r = seg.step(data.frame(t), &gt);
        } else {
            r = seg.step(data.frame(t));
        }
        sink(t, r, seg);
    }
}

}  // namespace

void run_dataset(const DatasetReader& data, const PipelineConfig& cfg, const fs::path& out, bool include_timing,
                 const FrameObserver& observer) {
    fs::create_directories(out / "masks");
    std::ofstream stats(out / "stats.jsonl", std::ios::trunc);
    if (!stats) throw DataError("cannot write " + (out / "stats.jsonl").string());
    segment(data, cfg, [&](std::size_t t, const FrameResult& r, const Segmenter& seg) {
        write_pgm(mask_path(out, t), r.labels);
        stats << r.stats_json(include_timing).dump() << "\n";
        if (observer) observer(r, seg);
    });
    stats.flush();
    if (!stats) throw DataError("failed writing " + (out / "stats.jsonl").string());
}

SequenceScores run_and_score(const DatasetReader& data, const PipelineConfig& cfg, const FrameObserver& observer) {
    const SceneSpec& spec = data.spec();
    SequenceEvaluator eval(data.num_objects(), default_boundary_tolerance(spec.height, spec.width));
    segment(data, cfg, [&](std::size_t t, const FrameResult& r, const Segmenter& seg) {
        eval.add_frame(r.labels, data.mask(t));
        if (observer) observer(r, seg);
    });
    return eval.finish();
}

SequenceScores evaluate_dirs(const fs::path& pred, const fs::path& gt) {
    const DatasetReader truth(gt);
    fs::path masks = fs::is_directory(pred / "masks") ? pred / "masks" : pred;
    if (!fs::is_directory(masks)) throw DataError("prediction directory " + pred.string() + " does not exist");
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(masks)) {
        if (e.is_regular_file() && e.path().extension() == ".pgm") names.insert(e.path().filename().string());
    }
    if (names.empty()) throw DataError("no predicted masks in " + masks.string());
    if (names.size() != truth.size() - 1)
        throw DataError("frame-count mismatch: " + std::to_string(names.size()) + " predicted masks, expected " +
                        std::to_string(truth.size() - 1));
    const fs::path run_dir = masks.parent_path();
    const SceneSpec& spec = truth.spec();
    SequenceEvaluator eval(truth.num_objects(), default_boundary_tolerance(spec.height, spec.width));
    for (std::size_t t = 1; t < truth.size(); ++t) {
        const fs::path file = mask_path(run_dir, t);
        if (!names.contains(file.filename().string())) throw DataError("missing predicted mask " + file.string());
        const LabelMap p = read_pgm(masks / file.filename());
        const LabelMap g = truth.mask(t);
        if (!p.same_shape(g)) throw DataError(file.string() + ": size differs from ground truth");
        eval.add_frame(p, g);
    }
    return eval.finish();
}

std::string AblationVariant::name() const { return to_string(policy) + (urr ? "+urr" : "-urr"); }

AblationVariant parse_variant(const std::string& name) {
    if (name.size() > 4) {
        const std::string suffix = name.substr(name.size() - 4);
        if (suffix == "+urr" || suffix == "-urr")
            return {parse_memory_policy(name.substr(0, name.size() - 4)), suffix == "+urr"};
    }
    throw ConfigError("unknown variant '" + name + "' (expected <policy>+urr or <policy>-urr)");
}

std::vector<AblationVariant> all_variants() {
    std::vector<AblationVariant> out;
    for (MemoryPolicy p : all_memory_policies()) {
        out.push_back({p, true});
        out.push_back({p, false});
    }
    return out;
}

PipelineConfig variant_config(const PipelineConfig& base, const AblationVariant& v) {
    PipelineConfig cfg = base;
    cfg.policy = v.policy;
    if (!v.urr) cfg.refine.u_threshold = 1.0;
    return cfg;
}

std::vector<AblationRow> run_ablation(const DatasetReader& data, const PipelineConfig& base,
                                      const std::vector<AblationVariant>& variants) {
    std::vector<AblationRow> rows;
    for (const AblationVariant& v : variants) rows.push_back({v, run_and_score(data, variant_config(base, v))});
    return rows;
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const AblationRow& r : rows) {
        out.push_back({{"variant", r.variant.name()},
                       {"JF_M", r.scores.jf_mean},
                       {"J_M", r.scores.j_agg.mean},
                       {"F_M", r.scores.f_agg.mean}});
    }
    return out;
}

nlohmann::json scorer_json(const Scorer& s) { return {{"kind", s.kind_name()}, {"w", s.w}, {"b", s.b}}; }

Scorer scorer_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == Scorer::fixed_cosine().kind_name()) return Scorer::fixed_cosine();
        if (kind == Scorer::trainable().kind_name()) return Scorer::trainable(j.at("w").get<double>(), j.at("b").get<double>());
        throw DataError("unknown scorer kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed scorer: ") + e.what());
    }
}

Scorer load_scorer(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return scorer_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<RefineSample> collect_refine_samples(const DatasetReader& data, const PipelineConfig& cfg,
                                                 std::size_t max_samples) {
    if (max_samples == 0) throw ConfigError("need at least one training frame");
    const std::size_t t0 = first_annotated(data);
    const std::size_t available = data.size() - 1;
    const std::size_t every = std::max<std::size_t>(1, available / max_samples);
    Segmenter seg(cfg, data.num_objects());
    seg.init(data.frame(t0), data.mask(t0));
    std::vector<RefineSample> out;
    for (std::size_t t = t0 + 1; t < data.size() && out.size() < max_samples; ++t) {
        const LabelMap gt = data.mask(t);
        FrameIntermediates mid;
        seg.step(data.frame(t), cfg.absorb_ground_truth ? &gt : nullptr, &mid);
        if ((t - t0 - 1) % every != 0) continue;
        out.push_back({std::move(mid.masks), std::move(mid.u), std::move(mid.feats), gt});
    }
    return out;
}

}  // namespace afb
